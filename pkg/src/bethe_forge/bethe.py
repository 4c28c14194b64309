"""Joint spectrum of the commuting family and the Bethe equations it implies.

Everything upstream is exact; this module switches to floating point.
The commuting operators are diagonalized together, sector by sector, and
the eigenvalue of every ``Q_I`` becomes an ordinary polynomial whose zeros
are the Bethe roots.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateSpectrum, LeadingCoeffUnderflow, RootCollision
from .hilbert import NestingPath, TensorOperator, Twist, sector_layout
from .nesting import q_operator, t_sym

DEFAULT_TOL = 1e-9
DEFAULT_U0 = 1 / 3
RETRIES = 5
# a Bethe equation whose denominator is this small (relative) is 0/0 at that root
SINGULAR = 1e-6


@dataclass
class SectorBasis:
    key: tuple
    states: tuple
    vecs: np.ndarray
    inv: np.ndarray


@dataclass
class Eigenbasis:
    """Common eigenvectors, one block per weight sector.

    ``states`` lists ``(sector position, column)`` in a fixed order; a state
    id is its position in that list.
    """
    tw: Twist
    sectors: list
    states: list = field(default_factory=list)

    def sector_of(self, state: int) -> SectorBasis:
        return self.sectors[self.states[state][0]]

    def counts(self, state: int) -> tuple:
        return self.sector_of(state).key

    def eigen_coeffs(self, op: TensorOperator, state: int) -> np.ndarray:
        """Ascending coefficients of the eigenvalue polynomial of ``op`` on ``state``."""
        s, col = self.states[state]
        sb = self.sectors[s]
        blk = op.blocks[sb.key]
        out = [(sb.inv @ c.astype(complex) @ sb.vecs)[col, col] for c in blk.float_coeffs()]
        return np.array(out if out else [0j])


def _scale(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def _eval_block(op: TensorOperator, key: tuple, u0: float) -> np.ndarray:
    blk = op.blocks[key]
    acc = np.zeros((blk.n, blk.n), dtype=float)
    for c in reversed(blk.float_coeffs()):
        acc = acc * u0 + c
    return acc


def _offdiag(m: np.ndarray) -> float:
    if m.shape[0] < 2:
        return 0.0
    return float(np.max(np.abs(m - np.diag(np.diag(m)))))


def diagonalize_family(tw: Twist, ops: Sequence[TensorOperator], u0: float = DEFAULT_U0,
                       tol: float = DEFAULT_TOL, seed: int = 0, retries: int = RETRIES) -> Eigenbasis:
    """Simultaneous eigenvectors of commuting operators, sector by sector.

    Each sector is diagonalized through a seeded random combination of the
    operators at ``u = u0`` (each scaled to unit max entry).  A combination
    with nearly repeated eigenvalues, or one that leaves some operator
    non-diagonal beyond ``tol``, is redrawn up to ``retries`` times.
    """
    rng = random.Random(seed)
    lay = sector_layout(tw.n, tw.N)
    keys = sorted(lay, key=lambda k: lay[k][0])
    sectors = []
    states = []
    for key in keys:
        dim = len(lay[key])
        mats = []
        for op in ops:
            m = _eval_block(op, key, u0)
            sc = _scale(m)
            if sc > 0:
                mats.append(m / sc)
        found = None
        if all(_offdiag(m) < tol and np.ptp(np.diag(m)) < tol for m in mats):
            # every operator is scalar here: any basis diagonalizes the family
            eye = np.identity(dim, dtype=complex)
            found = SectorBasis(key, tuple(tuple(a + 1 for a in t) for t in lay[key]), eye, eye)
        for _ in range(retries if found is None else 0):
            coeffs = [rng.uniform(0.5, 1.5) * rng.choice((-1, 1)) for _ in mats]
            comb = sum((c * m for c, m in zip(coeffs, mats)), np.zeros((dim, dim)))
            if dim == 1:
                vecs = np.ones((1, 1), dtype=complex)
                vals = np.array([comb[0, 0]], dtype=complex)
            else:
                vals, vecs = np.linalg.eig(comb)
                gaps = [abs(vals[a] - vals[b]) for a in range(dim) for b in range(a)]
                if min(gaps) < 1e3 * tol * max(1.0, float(np.max(np.abs(vals)))):
                    continue
            inv = np.linalg.inv(vecs)
            if all(_offdiag(inv @ m @ vecs) < tol * max(1.0, _scale(m)) for m in mats):
                order = sorted(range(dim), key=lambda a: (round(vals[a].real, 9), round(vals[a].imag, 9)))
                vecs = vecs[:, order]
                found = SectorBasis(key, tuple(tuple(a + 1 for a in t) for t in lay[key]),
                                    vecs, np.linalg.inv(vecs))
                break
        if found is None:
            raise DegenerateSpectrum(f"sector {key} did not separate after {retries} draws")
        for col in range(dim):
            states.append((len(sectors), col))
        sectors.append(found)
    return Eigenbasis(tw, sectors, states)


@dataclass
class QFunction:
    """Eigenvalue of ``Q_I`` on one joint eigenstate."""
    I: tuple
    state: int
    coeffs: np.ndarray
    roots: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return complex(self.coeffs[-1])

    def __call__(self, u):
        return np.polyval(self.coeffs[::-1], u)

    def to_json(self) -> dict:
        cplx = lambda z: [float(np.real(z)), float(np.imag(z))]
        return {"I": list(self.I), "state": self.state, "degree": self.degree,
                "coeffs": [cplx(c) for c in self.coeffs], "roots": [cplx(r) for r in self.roots]}


def _trim(coeffs: np.ndarray, tol: float, strict: bool) -> np.ndarray:
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    c = list(coeffs)
    while len(c) > 1 and abs(c[-1]) < tol * max(scale, 1.0):
        if strict:
            raise LeadingCoeffUnderflow(f"leading coefficient {c[-1]} vanishes numerically")
        c.pop()
    return np.array(c)


def q_function(I, tw: Twist, basis: Eigenbasis, state: int, tol: float = DEFAULT_TOL,
               strict: bool = False) -> QFunction:
    I = tuple(sorted(I))
    c = _trim(basis.eigen_coeffs(q_operator(I, tw), state), tol, strict)
    roots = np.roots(c[::-1]) if len(c) > 1 else np.array([], dtype=complex)
    return QFunction(I, state, c, np.sort_complex(roots.astype(complex)))


def q_functions(I, tw: Twist, basis: Eigenbasis, tol: float = DEFAULT_TOL,
                strict: bool = False) -> list:
    """``Q_I`` eigenvalue polynomials (ascending coefficients) and roots for every state."""
    return [q_function(I, tw, basis, s, tol, strict) for s in range(len(basis.states))]


def expected_degree(I, counts: tuple) -> int:
    """Number of sites whose direction lies in ``I`` for a sector with these counts."""
    return sum(counts[j - 1] for j in I)


# ---------------------------------------------------------------------------
# Bethe equations


def _bae_terms(kind: str, xi, xj, QI, QIi, QIij, u) -> tuple:
    """``(num, den, target)``: the Bethe equation at a root ``u`` of ``Q_{I,i}`` reads ``num/den = target``."""
    r = xi / xj
    if kind == "bb":
        return (r * QI(u - 2) * QIi(u + 2) * QIij(u), QI(u) * QIi(u - 2) * QIij(u + 2), -1.0)
    if kind == "ff":
        return (r * QI(u + 2) * QIi(u - 2) * QIij(u), QI(u) * QIi(u + 2) * QIij(u - 2), -1.0)
    if kind == "bf":
        return r * QI(u - 2) * QIij(u), QI(u) * QIij(u - 2), 1.0
    return r * QI(u + 2) * QIij(u), QI(u) * QIij(u + 2), 1.0


def _bae_residual(num, den, target) -> tuple:
    """``(residual, singular)``; a vanishing denominator falls back to ``|num - target·den|``."""
    if abs(den) > SINGULAR * max(1.0, abs(num)):
        return abs(num / den - target), False
    return abs(num - target * den), True


def _kind(tw: Twist, i: int, j: int) -> str:
    return "bf"[tw.parity(i)] + "bf"[tw.parity(j)]


def _separated(roots: np.ndarray, tol: float) -> bool:
    for a in range(len(roots)):
        for b in range(a):
            if abs(roots[a] - roots[b]) < tol:
                return False
    return True


def check_bae(path: NestingPath, tw: Twist, basis: Eigenbasis, tol: float = DEFAULT_TOL,
              strict: bool = False) -> dict:
    """Nested Bethe equations at every root of every intermediate ``Q`` on the path.

    Returns ``{"states": [...], "max_residual": float, "passed": bool}``;
    states whose roots collide are flagged and excluded from ``passed``
    (``strict=True`` raises :class:`RootCollision` instead).  Roots where the
    equation degenerates to ``0/0`` are listed under ``"singular"`` and checked
    in cross-multiplied form.
    """
    chain = path.subsets()
    fq = [[q_function(S, tw, basis, s, tol) for s in range(len(basis.states))] for S in chain]
    report = []
    worst = 0.0
    for s in range(len(basis.states)):
        entry = {"state": s, "sector": list(basis.counts(s)), "levels": [], "flagged": False}
        for k in range(1, len(chain) - 1):
            i, j = path.order[k - 1], path.order[k]
            QI, QIi, QIij = fq[k - 1][s], fq[k][s], fq[k + 1][s]
            kind = _kind(tw, i, j)
            if not _separated(QIi.roots, tol):
                if strict:
                    raise RootCollision(f"state {s}: roots of Q_{QIi.I} collide")
                entry["flagged"] = True
                entry["levels"].append({"I": list(QIi.I), "kind": kind, "collision": True})
                continue
            res, sing = [], []
            for k, r in enumerate(QIi.roots):
                val, singular = _bae_residual(*_bae_terms(kind, float(tw.xi_of(i)),
                                                          float(tw.xi_of(j)), QI, QIi, QIij, r))
                res.append(val)
                if singular:
                    sing.append(k)
            worst = max([worst] + res)
            level = {"I": list(QIi.I), "kind": kind, "residuals": res}
            if sing:
                level["singular"] = sing
            entry["levels"].append(level)
        report.append(entry)
    ok = all(r["flagged"] or all(max(l.get("residuals", [0.0]) or [0.0]) < tol for l in r["levels"])
             for r in report)
    return {"states": report, "max_residual": float(worst), "passed": bool(ok)}


def _poly(c) -> np.ndarray:
    return np.asarray(c, dtype=complex)


def _pshift(c: np.ndarray, s: float) -> np.ndarray:
    """Ascending coefficients of ``p(u + s)``."""
    out = np.zeros(len(c), dtype=complex)
    for d, a in enumerate(c):
        out[:d + 1] += a * np.array([math.comb(d, k) * s ** (d - k) for k in range(d + 1)])
    return out


def _pmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)


def _padd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(len(a), len(b))
    out = np.zeros(n, dtype=complex)
    out[:len(a)] += a
    out[:len(b)] += b
    return out


def divisibility_combination(kind: str, xi, xj, QI, QIi, QIj, QIij) -> np.ndarray:
    """The combination that the operatorial Bethe equations say ``Q_{I,i}`` divides."""
    S = _pshift
    if kind == "bb":
        return _padd(xi * _pmul(_pmul(S(QI, -2), QIij), S(QIi, 2)),
                     xj * _pmul(_pmul(QI, S(QIij, 2)), S(QIi, -2)))
    if kind == "ff":
        return _padd(xj * _pmul(_pmul(S(QIij, -2), QI), S(QIi, 2)),
                     xi * _pmul(_pmul(QIij, S(QI, 2)), S(QIi, -2)))
    if kind == "bf":
        return _padd(xi * _pmul(S(QI, -2), QIij), -xj * _pmul(QI, S(QIij, -2)))
    return _padd(xj * _pmul(QI, S(QIij, 2)), -xi * _pmul(S(QI, 2), QIij))


def _remainder(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Remainder of ascending-coefficient polynomials."""
    if len(den) <= 1:
        return np.zeros(1, dtype=complex)
    _, r = np.polydiv(num[::-1], den[::-1])
    return np.atleast_1d(r)[::-1]


def check_op_divisibility(I, i: int, j: int, tw: Twist, basis: Eigenbasis,
                          tol: float = DEFAULT_TOL) -> dict:
    """Per-state remainder of the operatorial Bethe combination modulo ``Q_{I,i}``.

    ``i`` is the index whose Q-operator must divide; ``j`` the other one.
    """
    I = tuple(sorted(I))
    if i == j or i in I or j in I:
        raise ValueError("need distinct i, j outside I")
    kind = _kind(tw, i, j)
    Ii, Ij, Iij = (tuple(sorted(I + extra)) for extra in ((i,), (j,), (i, j)))
    xi, xj = float(tw.xi_of(i)), float(tw.xi_of(j))
    rows = []
    worst = 0.0
    for s in range(len(basis.states)):
        q = {S: q_function(S, tw, basis, s, tol).coeffs for S in (I, Ii, Ij, Iij)}
        comb = divisibility_combination(kind, xi, xj, _poly(q[I]), _poly(q[Ii]), _poly(q[Ij]),
                                        _poly(q[Iij]))
        rem = _remainder(comb, _poly(q[Ii]))
        scale = max(1.0, float(np.max(np.abs(comb))))
        r = float(np.max(np.abs(rem))) / scale
        worst = max(worst, r)
        rows.append({"state": s, "remainder": r})
    return {"kind": kind, "states": rows, "max_remainder": float(worst), "passed": bool(worst < tol)}


# ---------------------------------------------------------------------------
# Closure checks


def t1_from_qfunctions(path: NestingPath, tw: Twist, basis: Eigenbasis, state: int, u) -> complex:
    """``T^1`` eigenvalue at ``u`` rebuilt from the Q-functions along ``path``."""
    chain = path.subsets()
    fq = [q_function(S, tw, basis, state) for S in chain]
    total = 0j
    for k in range(1, len(chain)):
        j = path.order[k - 1]
        sg = 1 if tw.parity(j) == 0 else -1
        total += sg * float(tw.xi_of(j)) * fq[k - 1](u - 2 * sg) * fq[k](u + 2 * sg) / (
            fq[k - 1](u) * fq[k](u))
    return fq[-1](u) * total


def check_t1_closure(path: NestingPath, tw: Twist, basis: Eigenbasis,
                     points: Sequence[float] = (0.37, 1.91, -2.63), tol: float = 1e-8) -> dict:
    """Compare the rebuilt ``T^1`` eigenvalues with the directly computed ones."""
    T1 = t_sym(tw.full_set(), 1, tw)
    worst = 0.0
    for s in range(len(basis.states)):
        c = basis.eigen_coeffs(T1, s)
        for u in points:
            direct = np.polyval(c[::-1], u)
            rebuilt = t1_from_qfunctions(path, tw, basis, s, u)
            worst = max(worst, abs(direct - rebuilt) / max(1.0, abs(direct)))
    return {"max_error": float(worst), "passed": bool(worst < tol)}


def check_degree_law(tw: Twist, basis: Eigenbasis, subsets: Sequence, tol: float = DEFAULT_TOL) -> dict:
    """``deg Q_I`` on each state equals the number of sites pointing into ``I``."""
    bad = []
    for I in subsets:
        for s in range(len(basis.states)):
            got = q_function(I, tw, basis, s, tol).degree
            want = expected_degree(I, basis.counts(s))
            if got != want:
                bad.append({"I": list(I), "state": s, "degree": got, "expected": want})
    return {"mismatches": bad, "passed": not bad}


def default_family(tw: Twist, path: NestingPath) -> list:
    """Operators used to fix the joint eigenbasis: the path's ``Q``s and ``T^1``."""
    return [q_operator(S, tw) for S in path.subsets()] + [t_sym(tw.full_set(), 1, tw)]
