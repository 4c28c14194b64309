"""Command-line front end: ``verify``, ``spectrum`` and ``hasse``.

Exit codes: 0 success, 1 a checked identity failed, 2 bad configuration,
3 the spectrum could not be separated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations, permutations

import numpy as np

from . import bethe, coderiv, nesting, superext
from .errors import BetheForgeError, ConfigError, DegenerateSpectrum
from .exactmath import rat
from .hilbert import NestingPath, TensorOperator, Twist, rat_inverse, subset_label

SCHEMA = 1
SUITES = ("master", "plucker", "br", "tq", "qq", "hirota", "bt", "wronskian", "comm",
          "removal", "super", "series")
DEFAULTS = {"K": 2, "M": 0, "N": 2, "draws": 3, "seed": 0, "smax": 2, "jobs": None,
            "suite": ["all"], "x": None, "y": None, "theta": None, "path": None,
            "out": None, "highlight_path": None, "csv": False, "timing": False,
            "override_size": False, "json": False}


# ---------------------------------------------------------------------------
# Configuration


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(ns: argparse.Namespace) -> dict:
    """Flags override the config file, which overrides the defaults."""
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(getattr(ns, "config", None)))
    for k, v in vars(ns).items():
        if k in ("config", "command", "func"):
            continue
        if v is not None and v is not False:
            cfg[k] = v
    if cfg["jobs"] is None:
        env = os.environ.get("BETHE_FORGE_JOBS")
        try:
            cfg["jobs"] = int(env) if env else 1
        except ValueError as exc:
            raise ConfigError(f"BETHE_FORGE_JOBS must be an integer, got {env!r}") from exc
    for key in ("K", "M", "N", "draws", "seed", "smax", "jobs"):
        try:
            cfg[key] = int(cfg[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key} must be an integer") from exc
    if cfg["K"] < 1 or cfg["M"] < 0 or cfg["N"] < 1 or cfg["draws"] < 1 or cfg["jobs"] < 1:
        raise ConfigError("need K >= 1, M >= 0, N >= 1, draws >= 1 and jobs >= 1")
    if isinstance(cfg["suite"], str):
        cfg["suite"] = [cfg["suite"]]
    return cfg


def _rats(values, what: str) -> list | None:
    if values is None:
        return None
    try:
        return [rat(v) for v in values]
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ConfigError(f"cannot parse {what} values {values!r}") from exc


_POOL = sorted({rat(f"{p}/{q}") for q in (1, 2, 3) for p in range(1, 13)})


def _rand_rat(rng: random.Random, lo: int, hi: int, dens=(1, 2, 3)) -> object:
    return rat(f"{rng.randint(lo, hi)}/{rng.choice(dens)}")


def draw_twist(cfg: dict, rng: random.Random) -> Twist:
    """Twist from the configuration; unspecified eigenvalues and θ are drawn from ``rng``."""
    K, M, N = cfg["K"], cfg["M"], cfg["N"]
    x, y, th = _rats(cfg["x"], "x"), _rats(cfg["y"], "y"), _rats(cfg["theta"], "theta")
    if x is not None and len(x) != K:
        raise ConfigError(f"expected {K} values of x, got {len(x)}")
    if y is not None and len(y) != M:
        raise ConfigError(f"expected {M} values of y, got {len(y)}")
    if th is not None and len(th) != N:
        raise ConfigError(f"expected {N} values of theta, got {len(th)}")
    if x is None or y is None:
        taken = set(x or []) | set(y or [])
        pool = [v for v in _POOL if v not in taken]
        picks = rng.sample(pool, (K if x is None else 0) + (M if y is None else 0))
        if x is None:
            x, picks = picks[:K], picks[K:]
        if y is None:
            y = picks[:M]
    if th is None:
        th = [_rand_rat(rng, -6, 6) for _ in range(N)]
    tw = Twist.make(x, th, y=y)
    coderiv.guard_size(tw, cfg["override_size"])
    return tw


def _point(tw: Twist, rng: random.Random, avoid=()) -> object:
    while True:
        t = rat(f"{rng.choice((-1, 1)) * rng.randint(1, 9)}/{rng.randint(5, 17)}")
        if t not in avoid and all(1 - t * x != 0 for x in tw.xi):
            return t


# ---------------------------------------------------------------------------
# Checks (module-level so worker processes can run them)


def _subsets(tw: Twist) -> list:
    full = tw.full_set()
    return [S for r in range(len(full) + 1) for S in combinations(full, r)]


def _twist_of(d: dict) -> Twist:
    return Twist(d["K"], d["M"], tuple(rat(v) for v in d["xi"]), tuple(rat(v) for v in d["theta"]))


def _is_zero_dense(a: np.ndarray) -> bool:
    return all(p.is_zero() for p in a.flat)


def _dense_text(a: np.ndarray) -> str:
    best = None
    for p in a.flat:
        if not p.is_zero() and (best is None or p.degree > best.degree):
            best = p
    return "0" if best is None else str(best)


def _check_series(tw: Twist, order, smax: int):
    path = NestingPath.from_order(order)
    got = nesting.gen_series(path, tw, smax)
    want = nesting.t_sym_series(tw.full_set(), smax, tw)
    res = TensorOperator.zero(tw.n, tw.N)
    for a, b in zip(got, want):
        res = res + (a - b)
    if smax >= 1:
        res = res + (nesting.t1_from_path(path, tw) - want[1])
    return res


def _check_comm(tw: Twist, A, B, v):
    def op(spec):
        I, s = tuple(spec[0]), spec[1]
        return nesting.t_sym(I, s, tw)
    a, b = op(A), op(B).shift(rat(v))
    return a * b - b * a


CHECKS = {
    "master": lambda tw, z, t, pi: superext.check_graded_master(
        tw, rat(z), rat(t), [(rat(p), e) for p, e in pi]),
    "plucker": lambda tw, zs, I, i, j: coderiv.check_plucker(tw, [rat(z) for z in zs], I, i, j),
    "master_det": lambda tw, zs: coderiv.check_master_det(tw, [rat(z) for z in zs]),
    "br": lambda tw, lam: coderiv.check_br(tuple(lam), tw),
    "tq": lambda tw, I, j, s: superext.check_tq_super(tuple(I), j, s, tw),
    "qq": lambda tw, I, a, b: superext.check_qq_super(tuple(I), a, b, tw),
    "hirota": lambda tw, I, a, s: nesting.check_hirota(tuple(I), a, s, tw),
    "bt": lambda tw, I, j, a, s: nesting.check_bt(tuple(I), j, a, s, tw),
    "wronskian": lambda tw, I, J: (nesting.wronskian_q(tuple(I), tuple(J), tw)
                                   - nesting.q_operator(tuple(I) + tuple(J), tw)),
    "comm": lambda tw, A, B, v: _check_comm(tw, A, B, v),
    "removal": lambda tw, m, j, omega, t: coderiv.check_removal(
        m, tw.N - m, j, tw, [[rat(v) for v in row] for row in omega] if omega else None,
        rat(t) if t is not None else None),
    "fat_hook": lambda tw, lam, I: superext.check_fat_hook(tuple(lam), tuple(I), tw),
    "bosonization": lambda tw, I, i, l: superext.check_bosonization(tuple(I), i, l, tw),
    "series": lambda tw, order, smax: _check_series(tw, order, smax),
}


def run_task(task: dict) -> dict:
    """Run one check; the result records whether the residual vanishes exactly."""
    t0 = time.perf_counter()
    tw = _twist_of(task["twist"])
    out = {"suite": task["suite"], "check": task["check"],
           "params": {"twist": task["twist"], **task["args"]}}
    try:
        res = CHECKS[task["check"]](tw, **task["args"])
        if isinstance(res, tuple):
            zero = all(r.is_zero() for r in res)
            text = next((r.max_residual_poly() for r in res if not r.is_zero()), "0")
        elif isinstance(res, bool):
            zero, text = res, "0" if res else "predicate failed"
        elif isinstance(res, np.ndarray):
            zero, text = _is_zero_dense(res), _dense_text(res)
        else:
            zero, text = res.is_zero(), res.max_residual_poly()
        out.update(residual_zero=bool(zero), max_residual_poly=text)
    except BetheForgeError as exc:
        out.update(residual_zero=False, max_residual_poly=f"error: {type(exc).__name__}: {exc}")
    out["wall_ms"] = round(1000 * (time.perf_counter() - t0), 3)
    return out


# ---------------------------------------------------------------------------
# Suite construction


def _random_omega(tw: Twist, rng: random.Random):
    n = tw.n
    while True:
        om = [[rng.randint(-2, 2) for _ in range(n)] for _ in range(n)]
        for a in range(n):
            om[a][a] = rng.randint(1, 3)
        arr = np.array([[rat(v) for v in row] for row in om], dtype=object)
        if rat_inverse(arr) is not None:
            return [[str(v) for v in row] for row in om]


def suite_tasks(suite: str, tw: Twist, rng: random.Random, smax: int) -> list:
    """``(check, args)`` pairs that make up ``suite`` for one drawn twist."""
    full = tw.full_set()
    bos = tw.M == 0
    subsets = _subsets(tw)
    out = []
    if suite == "master":
        z = _point(tw, rng)
        t = _point(tw, rng, {z})
        t2 = _point(tw, rng, {z, t})
        t3 = _point(tw, rng, {z, t, t2})
        e2 = 1 if bos else rng.choice((1, -1))
        e3 = 1 if bos else rng.choice((1, -1))
        for pi in ([], [(t2, e2)], [(t2, e2), (t3, e3)]):
            out.append(("master", {"z": str(z), "t": str(t),
                                   "pi": [[str(p), e] for p, e in pi]}))
    elif suite == "plucker":
        if not bos:
            return out
        zs = []
        for _ in range(3):
            zs.append(_point(tw, rng, set(zs)))
        zs_s = [str(z) for z in zs]
        out.append(("plucker", {"zs": zs_s, "I": [2], "i": 0, "j": 1}))
        out.append(("plucker", {"zs": zs_s, "I": [], "i": 0, "j": 1}))
        out.append(("master_det", {"zs": zs_s[:2]}))
    elif suite == "br":
        if not bos:
            return out
        for lam in ((1, 1), (2, 1), (2, 2)):
            out.append(("br", {"lam": list(lam)}))
    elif suite == "tq":
        for I in subsets:
            for j in full:
                if j not in I:
                    for s in range(smax + 1):
                        out.append(("tq", {"I": list(I), "j": j, "s": s}))
    elif suite == "qq":
        for I in subsets:
            rest = [j for j in full if j not in I]
            for a, b in combinations(rest, 2):
                out.append(("qq", {"I": list(I), "a": a, "b": b}))
    elif suite == "hirota":
        if not bos:
            return out
        for I in subsets:
            for a in (1, 2):
                for s in range(1, smax + 1):
                    out.append(("hirota", {"I": list(I), "a": a, "s": s}))
    elif suite == "bt":
        if not bos:
            return out
        for I in subsets:
            for j in full:
                if j not in I:
                    for a in (1, 2):
                        for s in range(1, smax + 1):
                            out.append(("bt", {"I": list(I), "j": j, "a": a, "s": s}))
    elif suite == "wronskian":
        for I in subsets:
            rest = [j for j in full if j not in I]
            for r in range(2, len(rest) + 1):
                for J in combinations(rest, r):
                    if bos:
                        out.append(("wronskian", {"I": list(I), "J": list(J)}))
    elif suite == "comm":
        ops = [(list(I), s) for I in subsets for s in range(smax + 1)]
        v = str(_rand_rat(rng, -5, 5, (1, 2, 3, 7)))
        for A, B in combinations(ops, 2):
            out.append(("comm", {"A": A, "B": B, "v": v}))
    elif suite == "removal":
        if not bos:
            return out
        omega = _random_omega(tw, rng)
        t = str(_point(tw, rng))
        for m in range(tw.N):
            for j in range(1, tw.K + 1):
                for om in (None, omega):
                    for tt in (None, t):
                        out.append(("removal", {"m": m, "j": j, "omega": om, "t": tt}))
    elif suite == "super":
        if bos:
            return out
        z = _point(tw, rng)
        t = _point(tw, rng, {z})
        t2 = _point(tw, rng, {z, t})
        for e in (1, -1):
            out.append(("master", {"z": str(z), "t": str(t), "pi": [[str(t2), e]]}))
        for I in subsets:
            rest = [j for j in full if j not in I]
            for i in rest:
                for l in rest:
                    if tw.parity(i) == 0 and tw.parity(l) == 1:
                        out.append(("bosonization", {"I": list(I), "i": i, "l": l}))
        for lam in ((1,), (2,), (1, 1), (2, 1), (2, 2), (3, 1)):
            out.append(("fat_hook", {"lam": list(lam), "I": list(full)}))
    elif suite == "series":
        orders = list(permutations(full))
        for order in orders[:2] + ([orders[-1]] if len(orders) > 2 else []):
            out.append(("series", {"order": list(order), "smax": smax}))
    else:
        raise ConfigError(f"unknown suite {suite!r}")
    return out


def build_tasks(cfg: dict) -> list:
    names = list(SUITES) if "all" in cfg["suite"] else list(cfg["suite"])
    for s in names:
        if s not in SUITES:
            raise ConfigError(f"unknown suite {s!r}; choose from {', '.join(SUITES)} or all")
    rng = random.Random(cfg["seed"])
    tasks = []
    for draw in range(cfg["draws"]):
        tw = draw_twist(cfg, rng)
        for suite in names:
            for check, args in suite_tasks(suite, tw, rng, cfg["smax"]):
                tasks.append({"suite": suite, "check": check, "draw": draw,
                              "twist": tw.to_json(), "args": args})
    return tasks


def _run_all(tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) < 2:
        return [run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


# ---------------------------------------------------------------------------
# Commands


def cmd_verify(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    tasks = build_tasks(cfg)
    results = _run_all(tasks, cfg["jobs"])
    for task, res in zip(tasks, results):
        res["draw"] = task["draw"]
        if not cfg["timing"]:
            res.pop("wall_ms", None)
    failed = [r for r in results if not r["residual_zero"]]
    summary = {}
    for r in results:
        s = summary.setdefault(r["suite"], {"checks": 0, "failed": 0})
        s["checks"] += 1
        s["failed"] += 0 if r["residual_zero"] else 1
    if cfg["json"]:
        doc = {"schema": SCHEMA, "command": "verify", "seed": cfg["seed"], "draws": cfg["draws"],
               "K": cfg["K"], "M": cfg["M"], "N": cfg["N"], "summary": summary,
               "passed": not failed, "results": results}
        out.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    else:
        for name, s in summary.items():
            status = "PASS" if s["failed"] == 0 else "FAIL"
            out.write(f"{status} {name}: {s['checks'] - s['failed']}/{s['checks']} residuals zero\n")
        for r in failed:
            out.write(f"  failed {r['check']} {json.dumps(r['params'], sort_keys=True)}: "
                      f"{r['max_residual_poly']}\n")
    return 1 if failed else 0


def _fmt(v: float) -> float:
    return float(f"{v:.12g}")


def _cplx(z) -> list:
    return [_fmt(np.real(z)) + 0.0, _fmt(np.imag(z)) + 0.0]


def spectrum_report(cfg: dict) -> dict:
    rng = random.Random(cfg["seed"])
    tw = draw_twist(cfg, rng)
    if cfg["path"]:
        try:
            path = NestingPath.parse(cfg["path"], tw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        path = NestingPath.from_order(tw.full_set())
    basis = bethe.diagonalize_family(tw, bethe.default_family(tw, path), seed=cfg["seed"])
    chain = path.subsets()
    bae = bethe.check_bae(path, tw, basis)
    closure = bethe.check_t1_closure(path, tw, basis)
    states = []
    for s in range(len(basis.states)):
        qs = {}
        for S in chain:
            f = bethe.q_function(S, tw, basis, s)
            qs[subset_label(S)] = {"degree": f.degree, "coeffs": [_cplx(c) for c in f.coeffs],
                                   "roots": [_cplx(r) for r in f.roots]}
        lv = bae["states"][s]
        states.append({"state": s, "sector": list(basis.counts(s)), "Q": qs,
                       "bae_residuals": [[_fmt(r) for r in l.get("residuals", [])]
                                         for l in lv["levels"]],
                       "flagged": bool(lv["flagged"])})
    return {"schema": SCHEMA, "command": "spectrum", "twist": tw.to_json(), "path": str(path),
            "graded": tw.M > 0, "states": states, "bae_passed": bool(bae["passed"]),
            "bae_max_residual": _fmt(bae["max_residual"]),
            "t1_closure_error": _fmt(closure["max_error"]), "t1_closure_passed": closure["passed"]}


def _roots_csv(rep: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "sector", "Q", "k", "re", "im"])
    for st in rep["states"]:
        sector = "-".join(str(c) for c in st["sector"])
        for label, q in st["Q"].items():
            for k, (re, im) in enumerate(q["roots"]):
                w.writerow([st["state"], sector, label, k, repr(re), repr(im)])
    return buf.getvalue()


def cmd_spectrum(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    rep = spectrum_report(cfg)
    if cfg["json"]:
        out.write(json.dumps(rep, indent=1, sort_keys=True) + "\n")
    elif cfg["csv"]:
        out.write(_roots_csv(rep))
    else:
        out.write(f"path {rep['path']}  states {len(rep['states'])}  "
                  f"BAE {'PASS' if rep['bae_passed'] else 'FAIL'} "
                  f"(max {rep['bae_max_residual']:.3g})  "
                  f"T1 closure {'PASS' if rep['t1_closure_passed'] else 'FAIL'}\n")
        for st in rep["states"]:
            degs = " ".join(f"Q_{k}:{v['degree']}" for k, v in st["Q"].items())
            out.write(f"  state {st['state']} sector {st['sector']}  {degs}\n")
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8") as fh:
            fh.write(_roots_csv(rep) if cfg["csv"] else json.dumps(rep, indent=1, sort_keys=True) + "\n")
    return 0 if rep["bae_passed"] and rep["t1_closure_passed"] else 1


def cmd_hasse(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    K, M = cfg["K"], cfg["M"]
    n = K + M
    tw = Twist(K, M, tuple(range(1, n + 1)), (0,))
    hl = None
    if cfg["highlight_path"]:
        try:
            hl = NestingPath.parse(cfg["highlight_path"], tw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    dot = nesting.hasse_export(tw, hl)
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8") as fh:
            fh.write(dot)
    if cfg["json"]:
        nodes = sum(1 for line in dot.splitlines() if "[label=" in line)
        edges = sum(1 for line in dot.splitlines() if "->" in line)
        out.write(json.dumps({"schema": SCHEMA, "command": "hasse", "K": K, "M": M,
                              "nodes": nodes, "edges": edges, "dot": dot}, sort_keys=True) + "\n")
    elif not cfg["out"]:
        out.write(dot)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _twist_args(p: argparse.ArgumentParser):
    p.add_argument("--K", type=int, help="number of bosonic directions")
    p.add_argument("--M", type=int, help="number of fermionic directions")
    p.add_argument("--N", type=int, help="number of sites")
    p.add_argument("--x", action="append", help="bosonic eigenvalue (repeat; p/q allowed)")
    p.add_argument("--y", action="append", help="fermionic eigenvalue (repeat)")
    p.add_argument("--theta", action="append", help="inhomogeneity per site (repeat)")
    p.add_argument("--seed", type=int)
    p.add_argument("--override-size", action="store_true", help="lift the chain size guard")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bethe-forge",
                                 description="Exact checks and spectra of twisted gl(K|M) spin chains.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument("--jobs", type=int, help="worker processes (env BETHE_FORGE_JOBS)")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run exact identity suites")
    _twist_args(v)
    v.add_argument("--suite", action="append", help=f"one of {', '.join(SUITES)}, all")
    v.add_argument("--draws", type=int)
    v.add_argument("--smax", type=int, help="largest symmetric label s")
    v.add_argument("--timing", action="store_true", help="include wall_ms per check")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("spectrum", parents=[common], help="Q-functions, Bethe roots, BAE residuals")
    _twist_args(s)
    s.add_argument("--path", help='nesting path, e.g. "12>1>" or "2,12"')
    s.add_argument("--csv", action="store_true", help="emit Bethe roots as CSV")
    s.add_argument("--out", help="also write the report to this file")
    s.set_defaults(func=cmd_spectrum)

    h = sub.add_parser("hasse", parents=[common], help="DOT graph of the Q-operator lattice")
    h.add_argument("--K", type=int)
    h.add_argument("--M", type=int)
    h.add_argument("--highlight-path", help='path to draw in red, e.g. "2,23,123,1234"')
    h.add_argument("--out", help="write DOT here instead of stdout")
    h.set_defaults(func=cmd_hasse)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = resolve(ns)
        return ns.func(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegenerateSpectrum as exc:
        print(f"degenerate spectrum: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
