"""Co-derivative engines and the identities that live at nesting level zero.

Two engines compute ``⊗_i (u_i + c + 2Ĥ) Π(g)`` for ``Π = ∏_m w(t_m)^{ε_m}``:

* :func:`coderivative_apply` perturbs the twist inside a nilpotent jet ring
  and reads off mixed first derivatives.  It follows the definition of the
  co-derivative literally and serves as the reference.
* :func:`expand_entries` uses the closed form of those derivatives: a sum
  over permutations of the sites, each cycle contributing a connected
  (log-derivative) weight.  It also handles residues at ``t = 1/ξ_j`` and
  formal series variables, and is what the nested constructions use.

:func:`diagram_oracle` is the single-factor permutation formula written out
independently, and :func:`rmatrix_transfer` builds ``T(u)`` from R-matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations, product
from typing import Iterable, Sequence

import numpy as np
from gmpy2 import mpq

from .characters import young
from .errors import ConfigError, PoleHit
from .exactmath import (LaurentJet, NilJet, PolyU, Rat, TruncSeries, det_laplace,
                        perm_sign, rat)
from .hilbert import (TensorOperator, Twist, koszul_sign, op_comm, op_divide,
                      rat_inverse, sector_layout)

SIZE_GUARD = {"N": 5, "n": 4}


def guard_size(tw: Twist, override: bool = False):
    if override:
        return
    if tw.N > SIZE_GUARD["N"] or tw.n > SIZE_GUARD["n"]:
        raise ConfigError(f"chain too large (N={tw.N}, K+M={tw.n}); pass override to force")


# ---------------------------------------------------------------------------
# Factor descriptions


@dataclass(frozen=True)
class WPoint:
    """``w(t)^exp`` at a rational point."""
    t: Rat
    exp: int = 1

    def __post_init__(self):
        object.__setattr__(self, "t", rat(self.t))
        if self.exp not in (1, -1):
            raise ValueError("exponent must be +1 or -1")


@dataclass(frozen=True)
class WPole:
    """Residue factor ``lim_{t→1/ξ_j} (1-ξ_j t) w(t)^{(-1)^{p_j}}`` for the 1-based index ``j``.

    The accompanying ``(1 - g t)`` on every site is folded in as well.
    """
    j: int


@dataclass(frozen=True)
class WFormal:
    """``w(z_var)^exp`` kept as a truncated power series in ``z_var``."""
    var: int
    exp: int = 1


@dataclass(frozen=True)
class WSpec:
    """``⊗(u_i + uShift + 2Ĥ)`` applied to ``Π = ∏ w(t)^exp`` over ``tList``.

    ``t`` may be a rational or a :class:`LaurentJet` (expansion around a pole).
    """
    tw: Twist
    uShift: Rat = mpq(0)
    tList: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "uShift", rat(self.uShift))
        items = []
        for t, e in self.tList:
            if e not in (1, -1):
                raise ValueError("exponent must be +1 or -1")
            if self.tw.M == 0 and e != 1:
                raise ValueError("bosonic twists only take exponent +1")
            items.append((t if isinstance(t, LaurentJet) else rat(t), e))
        object.__setattr__(self, "tList", tuple(items))

    def factors(self) -> tuple:
        if any(isinstance(t, LaurentJet) for t, _ in self.tList):
            raise TypeError("jet-valued t needs the jet engine")
        return tuple(WPoint(t, e) for t, e in self.tList)


def u_poly(tw: Twist, i: int, shift=0) -> PolyU:
    """``u_i + shift = u - θ_i + shift`` for the 0-based site ``i``."""
    return PolyU.linear(rat(shift) - tw.theta[i], 1)


def phi_poly(tw: Twist) -> PolyU:
    """``φ(u) = ∏ u_i``."""
    out = PolyU.const(1)
    for i in range(tw.N):
        out = out * u_poly(tw, i)
    return out


# ---------------------------------------------------------------------------
# Cycle-expansion engine


@lru_cache(maxsize=None)
def _sigma_table(N: int):
    rows = []
    for sigma in permutations(range(N)):
        seen = [False] * N
        cycles = []
        for i in range(N):
            if seen[i]:
                continue
            cyc = []
            j = i
            while not seen[j]:
                seen[j] = True
                cyc.append(j)
                j = sigma[j]
            cycles.append(tuple(cyc))
        kinds = tuple(0 if s == i else (1 if s > i else 2) for i, s in enumerate(sigma))
        rows.append((sigma, tuple(cycles), kinds))
    return tuple(rows)


class _Expander:
    """Evaluates the per-permutation weights for one factor list."""

    def __init__(self, tw: Twist, shift, factors: Sequence, dcoef, caps):
        self.tw = tw
        self.shift = rat(shift)
        self.factors = tuple(factors)
        self.kappa = rat(dcoef)
        self.caps = tuple(caps)
        self.formal = any(isinstance(f, WFormal) for f in self.factors)
        if self.formal and not self.caps:
            raise ValueError("formal factors need truncation caps")
        xi = tw.xi
        grading = tw.grading
        self.poles = [f.j - 1 for f in self.factors if isinstance(f, WPole)]
        if len(set(self.poles)) != len(self.poles):
            raise ValueError("repeated pole")
        for f in self.factors:
            if isinstance(f, WPoint):
                for a, x in enumerate(xi):
                    if 1 - x * f.t == 0:
                        raise PoleHit(f"t = {f.t} sits on the pole 1/ξ_{a + 1}")
        # per-label prefactor ∏_{m∈poles}(1 - ξ_a/ξ_m), zero when a is itself a pole
        self.pf = [self._pf(a, skip=None) for a in range(tw.n)]
        self.eps = []
        for f in self.factors:
            if isinstance(f, WPole):
                self.eps.append(1 if grading[f.j - 1] == 0 else -1)
            else:
                self.eps.append(f.exp)
        self._cache: dict = {}

    def _pf(self, a: int, skip):
        xi = self.tw.xi
        out = mpq(1)
        for m in self.poles:
            if m == skip:
                continue
            out *= 1 - xi[a] / xi[m]
        return out

    def _lift(self, v):
        if self.formal and not isinstance(v, TruncSeries):
            return TruncSeries.const(v, self.caps)
        return v

    def site(self, f, a: int, kind: int):
        """Factor ``f``'s site value (including the pole prefactor) for row label ``a``."""
        xi = self.tw.xi[a]
        k = self.kappa
        if isinstance(f, WPoint):
            num = xi * f.t if kind != 2 else mpq(1)
            return k * num / (1 - xi * f.t) * self.pf[a]
        if isinstance(f, WPole):
            m = f.j - 1
            if a == m:
                return k * self._pf(a, skip=m)
            if a in self.poles:
                return mpq(0)
            r = xi / self.tw.xi[m]
            num = r if kind != 2 else mpq(1)
            return k * num / (1 - r) * self.pf[a]
        # formal
        start = 1 if kind != 2 else 0
        return TruncSeries.geometric(f.var, xi, start, k * self.pf[a], self.caps)

    def cycle_weight(self, cyc: tuple, kinds: tuple, labels: tuple):
        key = (cyc, tuple(kinds[i] for i in cyc), tuple(labels[i] for i in cyc))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        total = None
        for f, e in zip(self.factors, self.eps):
            prod = None
            for i in cyc:
                v = self.site(f, labels[i], kinds[i])
                prod = v if prod is None else (self._lift(prod) * v if self.formal else prod * v)
                if not isinstance(prod, TruncSeries) and prod == 0:
                    break
            prod = self._lift(prod)
            if e < 0:
                prod = -prod
            total = prod if total is None else total + prod
        if len(cyc) == 1:
            i = cyc[0]
            uterm = u_poly(self.tw, i, self.shift) * self.pf[labels[i]]
            uterm = self._lift(uterm)
            total = uterm if total is None else total + uterm
        if total is None:
            total = self._lift(mpq(0))
        self._cache[key] = total
        return total

    def pi_value(self):
        xi = self.tw.xi
        s = [1 if p == 0 else -1 for p in self.tw.grading]
        val = self._lift(mpq(1))
        for f, e in zip(self.factors, self.eps):
            if isinstance(f, WPoint):
                v = mpq(1)
                for a in range(self.tw.n):
                    base = 1 - xi[a] * f.t
                    v *= base ** (-e * s[a])
                val = val * v
            elif isinstance(f, WPole):
                j = f.j - 1
                v = mpq(1)
                for a in range(self.tw.n):
                    if a != j:
                        v *= (1 - xi[a] / xi[j]) ** (-e * s[a])
                val = val * v
            else:
                numer, denom = [], []
                for a in range(self.tw.n):
                    if e * s[a] > 0:
                        denom.append(xi[a])
                    else:
                        numer.append(xi[a])
                val = val * TruncSeries.from_factors(f.var, numer, denom, self.caps)
        return val


def expand_entries(tw: Twist, shift, factors: Sequence, dcoef=2, caps: tuple = ()) -> dict:
    """``{(row, col): value}`` of ``⊗(u_i + shift + dcoef·Ĥ) Π`` over in-sector pairs.

    Rows and columns are 0-based basis tuples.  Values are :class:`PolyU`,
    or :class:`TruncSeries` when a :class:`WFormal` factor is present.
    """
    ex = _Expander(tw, shift, factors, dcoef, caps)
    grading = tw.grading
    table = _sigma_table(tw.N)
    out = {}
    for basis in sector_layout(tw.n, tw.N).values():
        for col in basis:
            for sigma, cycles, kinds in table:
                row = tuple(col[s] for s in sigma)
                term = None
                for cyc in cycles:
                    w = ex.cycle_weight(cyc, kinds, row)
                    term = w if term is None else term * w
                    if not isinstance(term, TruncSeries) and term == 0:
                        break
                if isinstance(term, TruncSeries):
                    if term.is_zero():
                        continue
                elif term == 0:
                    continue
                if koszul_sign(col, grading, sigma) < 0:
                    term = -term
                key = (row, col)
                out[key] = out[key] + term if key in out else term
    pi = ex.pi_value()
    result = {}
    for key, v in out.items():
        v = v * pi if not isinstance(pi, TruncSeries) else pi * v
        if not isinstance(v, (PolyU, TruncSeries)):
            v = PolyU.const(v)
        result[key] = v
    return result


def w_operator(tw: Twist, shift, factors: Sequence, dcoef=2) -> TensorOperator:
    """``⊗(u_i + shift + dcoef·Ĥ) Π`` as an operator (no formal factors)."""
    ent = expand_entries(tw, shift, factors, dcoef)
    return TensorOperator.from_entries(tw.n, tw.N, ent)


def series_operators(tw: Twist, shift, factors: Sequence, caps: tuple,
                     exps: Iterable[tuple], prefactor: TruncSeries | None = None) -> dict:
    """Coefficients of ``prefactor · ⊗(...)Π`` at the requested z-exponent tuples."""
    ent = expand_entries(tw, shift, factors, 2, caps)
    if prefactor is not None:
        ent = {k: prefactor * v for k, v in ent.items()}
    out = {}
    for e in exps:
        e = tuple(e)
        out[e] = TensorOperator.from_entries(
            tw.n, tw.N, {k: v.coefficient(e) for k, v in ent.items()})
    return out


# ---------------------------------------------------------------------------
# Nilpotent-jet engine


def _mat_mul(a, b, zero):
    n = len(a)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = zero
            for k in range(n):
                acc = acc + a[i][k] * b[k][j]
            row.append(acc)
        out.append(row)
    return out


def _even_inverse(m, zero, one):
    """Inverse of a matrix with even (mutually commuting) entries, via the adjugate."""
    n = len(m)
    d = det_laplace(m, zero, one)
    dinv = d.inverse()
    if n == 1:
        return [[dinv]]
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(m) if k != i]
            c = det_laplace(minor, zero, one)
            adj[j][i] = c if (i + j) % 2 == 0 else -c
    return [[adj[i][j] * dinv for j in range(n)] for i in range(n)]


def _sdet(x, K: int, M: int, zero, one):
    """Berezinian of a block matrix ``[[A, B], [C, D]]`` with bosonic block size ``K``."""
    if M == 0:
        return det_laplace(x, zero, one)
    A = [row[:K] for row in x[:K]]
    B = [row[K:] for row in x[:K]]
    C = [row[:K] for row in x[K:]]
    D = [row[K:] for row in x[K:]]
    Dinv = _even_inverse(D, zero, one)
    BDC = _mat_mul_rect(_mat_mul_rect(B, Dinv, zero), C, zero)
    S = [[A[i][j] - BDC[i][j] for j in range(K)] for i in range(K)]
    return det_laplace(S, zero, one) * det_laplace(D, zero, one).inverse()


def _mat_mul_rect(a, b, zero):
    rows, inner, cols = len(a), len(b), len(b[0]) if b else 0
    return [[sum((a[i][k] * b[k][j] for k in range(inner)), zero) for j in range(cols)]
            for i in range(rows)]


def _site_levels(N: int) -> list:
    # the derivative on site N acts first, so its perturbation sits leftmost
    return [N - 1 - i for i in range(N)]


def _entry_sign(grading, row, col, S) -> int:
    """Sign turning a jet coefficient into a matrix entry of ``Ĥ`` on the sites ``S``.

    Each differentiated site contributes ``(-1)^{p(col)}``; the remaining
    factors are the Koszul signs of carrying the odd generators past the
    column labels of later differentiated sites and the row labels of later
    untouched sites.
    """
    if not any(grading):
        return 1
    e = 0
    N = len(row)
    for idx, i in enumerate(S):
        k, l = row[i], col[i]
        e += grading[l]
        for j in S[idx + 1:]:
            e += grading[l] * (grading[row[j]] + grading[col[j]])
        gp = grading[k] + grading[l]
        if gp & 1:
            for m in range(i + 1, N):
                if m not in S:
                    e += grading[row[m]]
    return -1 if e & 1 else 1


def jet_pi(tw: Twist, tlist: Sequence, levels: int | None = None) -> NilJet:
    """``Π`` evaluated at the perturbed group element ``(1+φ^(0))···(1+φ^(L-1)) g``."""
    n = tw.n
    L = tw.N if levels is None else levels
    grading = tw.grading
    zero = NilJet({}, grading)
    one = NilJet.scalar(mpq(1), grading)
    G = [[one if a == b else zero for b in range(n)] for a in range(n)]
    for lvl in range(L):
        step = [[(one if a == b else zero) + NilJet.generator(lvl, a, b, grading)
                 for b in range(n)] for a in range(n)]
        G = _mat_mul(G, step, zero)
    G = [[G[a][b] * tw.xi[b] for b in range(n)] for a in range(n)]
    pi = one
    for t, e in tlist:
        if not isinstance(t, LaurentJet):
            for a, x in enumerate(tw.xi):
                if 1 - x * t == 0:
                    raise PoleHit(f"t = {t} sits on the pole 1/ξ_{a + 1}")
        X = [[(one if a == b else zero) - G[a][b] * t for b in range(n)] for a in range(n)]
        sd = _sdet(X, tw.K, tw.M, zero, one)
        pi = pi * (sd.inverse() if e > 0 else sd)
    return pi


def coderivative_jet_entries(spec: WSpec, dcoef=2) -> dict:
    """Entries of ``⊗(u_i + uShift + dcoef·Ĥ)Π`` from the jet ring (values may be jets)."""
    tw = spec.tw
    N = tw.N
    grading = tw.grading
    pi = jet_pi(tw, spec.tList)
    levels = _site_levels(N)
    kappa = rat(dcoef)
    upolys = [u_poly(tw, i, spec.uShift) for i in range(N)]
    out = {}
    for basis in sector_layout(tw.n, N).values():
        for row in basis:
            for col in basis:
                total = None
                for r in range(N + 1):
                    for S in combinations(range(N), r):
                        if any(row[i] != col[i] for i in range(N) if i not in S):
                            continue
                        key = tuple((levels[i], col[i], row[i]) for i in S)
                        c = pi.coefficient(key)
                        if isinstance(c, int) and c == 0:
                            continue
                        if isinstance(c, (LaurentJet,)) and not c.coeffs and c.prec is None:
                            continue
                        sgn = _entry_sign(grading, row, col, S)
                        scal = kappa ** r * sgn
                        rest = PolyU.const(1)
                        for i in range(N):
                            if i not in S:
                                rest = rest * upolys[i]
                        term = (c * scal) * rest if not isinstance(c, LaurentJet) else c * (rest * scal)
                        total = term if total is None else total + term
                if total is not None:
                    out[(row, col)] = total
    return out


def coderivative_apply(spec: WSpec, dcoef=2) -> TensorOperator:
    """``⊗_i (u_i + uShift + 2Ĥ) Π(g)`` by differentiating inside the jet ring."""
    ent = coderivative_jet_entries(spec, dcoef)
    clean = {}
    for k, v in ent.items():
        if isinstance(v, LaurentJet):
            raise TypeError("jet-valued result; use coderivative_jet_entries")
        clean[k] = v if isinstance(v, PolyU) else PolyU.const(v)
    return TensorOperator.from_entries(spec.tw.n, spec.tw.N, clean)


# ---------------------------------------------------------------------------
# Explicit permutation-sum oracle


def diagram_oracle(spec: WSpec, normalized: bool = False) -> TensorOperator:
    """``⊗(2 + u_i + 2Ĥ) w(t)`` as an explicit sum over site permutations.

    The site factor for ``σ`` is ``u_i δ_{iσ(i)} + 2 (x t)^{[σ(i)>i]} / (1 - x t)``
    with ``x = x_{k_i}``; ``normalized`` multiplies by ``(1 - g t)^{⊗N}``,
    giving ``u_i δ (1 - x t) + 2 (x t)^{[σ(i)>i]}``.
    """
    tw = spec.tw
    if tw.M:
        raise ValueError("the permutation-sum oracle is bosonic")
    if len(spec.tList) != 1 or spec.tList[0][1] != 1:
        raise ValueError("the permutation-sum oracle takes a single w(t)")
    t = spec.tList[0][0]
    N = tw.N
    wt = mpq(1)
    for x in tw.xi:
        if 1 - x * t == 0:
            raise PoleHit(f"t = {t} sits on a pole")
        wt /= 1 - x * t
    entries = {}
    for basis in sector_layout(tw.n, N).values():
        for col in basis:
            for sigma in permutations(range(N)):
                row = tuple(col[s] for s in sigma)
                term = PolyU.const(wt)
                for i in range(N):
                    x = tw.xi[row[i]]
                    up = 1 if sigma[i] > i else 0
                    if normalized:
                        f = PolyU.const(2 * (x * t) ** up)
                        if sigma[i] == i:
                            f = f + u_poly(tw, i) * (1 - x * t)
                    else:
                        f = PolyU.const(2 * (x * t) ** up / (1 - x * t))
                        if sigma[i] == i:
                            f = f + u_poly(tw, i)
                    term = term * f
                key = (row, col)
                entries[key] = entries[key] + term if key in entries else term
    return TensorOperator.from_entries(tw.n, N, entries)


# ---------------------------------------------------------------------------
# Transfer matrices


def _jt_exponents(lam: Sequence[int]):
    """Yield ``(sign, exps)`` so that ``χ_λ = Σ sign · ∏_r χ_{exps[r]}``."""
    a = len(lam)
    for sigma in permutations(range(a)):
        exps = tuple(lam[r] + sigma[r] - r for r in range(a))
        if min(exps) < 0:
            continue
        yield perm_sign(sigma), exps


def transfer_matrix(lam: Sequence[int], tw: Twist, engine: str = "cycle") -> TensorOperator:
    """``⊗(u_i + 2Ĥ) χ_λ(g)`` with ``χ_λ`` expanded by Jacobi-Trudi.

    ``engine="cycle"`` reads the needed z-coefficients off the cycle
    expansion of ``⊗(u_i + 2Ĥ) ∏_r w(z_r)``; ``engine="jet"`` carries each
    ``z_r`` as a jet around ``0`` in the nilpotent-jet engine (single-row
    shapes only).
    """
    lam = young(lam)
    N = tw.N
    if not lam:
        return TensorOperator.scalar(phi_poly(tw), tw.n, N)
    terms = list(_jt_exponents(lam))
    if engine == "jet":
        if len(lam) != 1:
            raise ValueError("the jet route handles single-row shapes")
        s = lam[0]
        z = LaurentJet({1: mpq(1)}, prec=s + 1)
        ent = coderivative_jet_entries(WSpec(tw, 0, ((z, 1),)))
        out = {}
        for k, v in ent.items():
            c = v[s] if isinstance(v, LaurentJet) else (v if s == 0 else 0)
            out[k] = c if isinstance(c, PolyU) else PolyU.const(c)
        return TensorOperator.from_entries(tw.n, N, out)
    if engine != "cycle":
        raise ValueError(f"unknown engine {engine!r}")
    a = len(lam)
    if not terms:
        return TensorOperator.zero(tw.n, N)
    caps = tuple(max(e[r] for _, e in terms) for r in range(a))
    factors = [WFormal(r) for r in range(a)]
    ops = series_operators(tw, 0, factors, caps, {e for _, e in terms})
    out = TensorOperator.zero(tw.n, N)
    for sgn, e in terms:
        out = out + ops[e] if sgn > 0 else out - ops[e]
    return out


def rmatrix_transfer(tw: Twist, reverse: bool = False) -> TensorOperator:
    """``str_0 [R_{0N}(u_N) ··· R_{01}(u_1) g_0]`` with ``R(u) = u + 2P`` (graded ``P``).

    ``reverse`` uses the product ``R_{01} ··· R_{0N}`` instead.
    """
    n, N = tw.n, tw.N
    grading = tw.grading
    order = list(range(1, N + 1))
    if reverse:
        order.reverse()
    entries: dict = {}
    for col in product(range(n), repeat=N):
        for a in range(n):
            state = {(a,) + col: PolyU.const(tw.xi[a])}
            for site in order:
                nxt: dict = {}
                up = u_poly(tw, site - 1)
                perm = list(range(N + 1))
                perm[0], perm[site] = perm[site], perm[0]
                for vec, c in state.items():
                    nxt[vec] = nxt[vec] + c * up if vec in nxt else c * up
                    swapped = tuple(vec[p] for p in perm)
                    sgn = koszul_sign(vec, grading, perm)
                    term = c * (2 * sgn)
                    nxt[swapped] = nxt[swapped] + term if swapped in nxt else term
                state = nxt
            sgn_a = -1 if grading[a] else 1
            for vec, c in state.items():
                if vec[0] != a or c.is_zero():
                    continue
                key = (vec[1:], col)
                term = c * sgn_a
                entries[key] = entries[key] + term if key in entries else term
    return TensorOperator.from_entries(n, N, entries)


# ---------------------------------------------------------------------------
# Checks


def _pt(tw: Twist, ts: Iterable) -> list:
    return [WPoint(t) for t in ts]


def _pi_factors(tw: Twist, pi: Sequence) -> list:
    """Normalize a Π description: rationals (exp +1), ``(t, exp)`` pairs or factor objects."""
    out = []
    for f in pi:
        if isinstance(f, (WPoint, WPole, WFormal)):
            out.append(f)
        elif isinstance(f, tuple):
            out.append(WPoint(f[0], f[1]))
        else:
            out.append(WPoint(f))
    return out


def master_sides(tw: Twist, z, t, pi: Sequence = ()):
    """Both sides of the master identity for ``w(z)``, ``w(t)`` and a base ``Π``."""
    z, t = rat(z), rat(t)
    base = _pi_factors(tw, pi)
    W = lambda shift, extra: w_operator(tw, shift, list(extra) + base)
    wz, wt = WPoint(z), WPoint(t)
    lhs = W(2, [wz, wt]) * W(0, []) * (t - z)
    rhs = W(0, [wz]) * W(2, [wt]) * t - W(2, [wz]) * W(0, [wt]) * z
    return lhs, rhs


def check_master(tw: Twist, z, t, pi: Sequence = ()) -> TensorOperator:
    """Residual of ``(t-z)W_{zt}^{+2} W^{0} = t W_z^{0} W_t^{+2} - z W_z^{+2} W_t^{0}``."""
    lhs, rhs = master_sides(tw, z, t, pi)
    return lhs - rhs


def w_generating(tw: Twist, zs: Sequence) -> TensorOperator:
    """``W_I(u) = ⊗(u_i + 2Ĥ) ∏_{k∈I} w(z_k)``."""
    return w_operator(tw, 0, _pt(tw, zs))


def check_plucker(tw: Twist, zs: Sequence, I: Sequence[int], i: int, j: int) -> TensorOperator:
    """Residual of the Plücker relation among the ``W`` operators.

    ``zs`` is the full list of spectral points; ``I``, ``i``, ``j`` index into it.
    """
    if i == j or i in I or j in I:
        raise ValueError("need distinct i, j outside I")
    zz = [rat(z) for z in zs]
    W = lambda idx: w_generating(tw, [zz[k] for k in idx])
    I = list(I)
    Wij, W0 = W(I + [i, j]), W(I)
    Wi, Wj = W(I + [i]), W(I + [j])
    lhs = Wij.shift(2) * W0 * (zz[i] - zz[j])
    rhs = Wj * Wi.shift(2) * zz[i] - Wj.shift(2) * Wi * zz[j]
    return lhs - rhs


def _op_det(mat: list, N: int, q: int) -> TensorOperator:
    """Determinant of a square array of mutually commuting operators (Laplace)."""
    zero = TensorOperator.zero(q, N)
    one = TensorOperator.identity(q, N)
    return det_laplace(mat, zero, one)


def check_master_det(tw: Twist, zs: Sequence) -> TensorOperator:
    """Residual of ``W_{1..n} · det(z_j^{n-k}) · ∏φ(u-2k) = det(z_j^{n-k} W_j(u-2k+2))``."""
    zz = [rat(z) for z in zs]
    n = len(zz)
    q, N = tw.n, tw.N
    singles = [w_generating(tw, [z]) for z in zz]
    mat = [[singles[j].shift(-2 * k) * zz[j] ** (n - 1 - k) for k in range(n)] for j in range(n)]
    rhs = _op_det(mat, N, q)
    vdm = det_laplace([[zz[j] ** (n - 1 - k) for k in range(n)] for j in range(n)], mpq(0), mpq(1))
    phi = phi_poly(tw)
    den = PolyU.const(vdm)
    for k in range(1, n):
        den = den * phi.shift(-2 * k)
    lhs = w_generating(tw, zz) * den
    return lhs - rhs


def check_br(lam: Sequence[int], tw: Twist) -> TensorOperator:
    """Residual of ``T^λ · ∏_{k=1}^{a-1} φ(u-2k) = det(T^{λ_j+k-j}(u-2k+2))``."""
    lam = young(lam)
    a = len(lam)
    q, N = tw.n, tw.N
    sym = {}

    def T(s):
        if s < 0:
            return TensorOperator.zero(q, N)
        if s not in sym:
            sym[s] = transfer_matrix((s,) if s else (), tw)
        return sym[s]

    mat = [[T(lam[j] + k - j).shift(-2 * k) for k in range(a)] for j in range(a)]
    rhs = _op_det(mat, N, q)
    phi = phi_poly(tw)
    den = PolyU.const(1)
    for k in range(1, a):
        den = den * phi.shift(-2 * k)
    lhs = transfer_matrix(lam, tw) * den
    return lhs - rhs


def br_transfer(lam: Sequence[int], tw: Twist) -> TensorOperator:
    """``T^λ`` from symmetric ``T^s`` by the determinant formula with exact division."""
    lam = young(lam)
    a = len(lam)
    q, N = tw.n, tw.N
    if not lam:
        return TensorOperator.scalar(phi_poly(tw), q, N)
    T = lambda s: (transfer_matrix((s,) if s else (), tw) if s >= 0 else TensorOperator.zero(q, N))
    mat = [[T(lam[j] + k - j).shift(-2 * k) for k in range(a)] for j in range(a)]
    num = _op_det(mat, N, q)
    phi = phi_poly(tw)
    den = PolyU.const(1)
    for k in range(1, a):
        den = den * phi.shift(-2 * k)
    return op_divide(num, TensorOperator.scalar(den, q, N))


def check_commutativity(tw: Twist, pi1: Sequence, pi2: Sequence, v) -> TensorOperator:
    """``⟦⊗(u_i + Ĥ)Π, ⊗(u_i + v + Ĥ)Π′⟧`` with Π, Π′ given as w-factor lists."""
    a = w_operator(tw, 0, _pi_factors(tw, pi1), dcoef=1)
    b = w_operator(tw, rat(v), _pi_factors(tw, pi2), dcoef=1)
    return op_comm(a, b)


def check_commutativity_chars(tw: Twist, lam1, lam2, v) -> TensorOperator:
    """Commutator of ``T^λ(u)`` and ``T^μ(u + v)``."""
    return op_comm(transfer_matrix(lam1, tw), transfer_matrix(lam2, tw).shift(rat(v)))


# ---------------------------------------------------------------------------
# Removal of eigenvalues in a general (non-diagonal) frame


def _dense_twist(tw: Twist, omega) -> tuple:
    """``(g, Ω, Ω⁻¹)`` with ``g = Ω⁻¹ diag(ξ) Ω`` as rational matrices."""
    n = tw.n
    if omega is None:
        om = np.array([[mpq(1) if a == b else mpq(0) for b in range(n)] for a in range(n)],
                      dtype=object)
    else:
        om = np.array([[rat(v) for v in row] for row in omega], dtype=object)
        if om.shape != (n, n):
            raise ValueError(f"Ω must be {n}x{n}")
    oinv = rat_inverse(om)
    if oinv is None:
        raise ValueError("Ω is singular")
    diag = np.array([[tw.xi[a] if a == b else mpq(0) for b in range(n)] for a in range(n)],
                    dtype=object)
    return oinv.dot(diag).dot(om), om, oinv


def _perturbed(g, levels: Sequence[int]) -> list:
    """``(1+φ^(l_1))···(1+φ^(l_k)) g`` over NilJet entries, ``levels`` ascending."""
    n = g.shape[0]
    zero, one = NilJet({}), NilJet.scalar(mpq(1))
    G = [[one if a == b else zero for b in range(n)] for a in range(n)]
    for lvl in sorted(levels):
        step = [[(one if a == b else zero) + NilJet.generator(lvl, a, b) for b in range(n)]
                for a in range(n)]
        G = _mat_mul(G, step, zero)
    return [[sum((G[a][c] * g[c, b] for c in range(n)), zero) for b in range(n)]
            for a in range(n)]


def _eigenvalue_jet(G: list, x0, rounds: int) -> NilJet:
    """The eigenvalue of the perturbed matrix ``G`` that reduces to ``x0``, by Newton steps."""
    n = len(G)
    zero, one = NilJet({}), NilJet.scalar(mpq(1))
    lam = NilJet.scalar(rat(x0))
    for _ in range(rounds + 1):
        A = [[(lam if a == b else zero) - G[a][b] for b in range(n)] for a in range(n)]
        p = det_laplace(A, zero, one)
        dp = zero
        for i in range(n):
            minor = [row[:i] + row[i + 1:] for k, row in enumerate(A) if k != i]
            dp = dp + (det_laplace(minor, zero, one) if minor else one)
        lam = lam - p * dp.inverse()
    A = [[(lam if a == b else zero) - G[a][b] for b in range(n)] for a in range(n)]
    if det_laplace(A, zero, one).terms:
        raise ArithmeticError("eigenvalue jet did not converge")
    return lam


def _dense_entries(F: NilJet, tw: Twist, shift=0, dcoef=2) -> np.ndarray:
    """Dense matrix of ``⊗(u_i + shift + dcoef·Ĥ)`` applied to the jet ``F`` (bosonic)."""
    N, n = tw.N, tw.n
    levels = _site_levels(N)
    kappa = rat(dcoef)
    upolys = [u_poly(tw, i, shift) for i in range(N)]
    states = list(product(range(n), repeat=N))
    out = np.empty((len(states), len(states)), dtype=object)
    for r, row in enumerate(states):
        for c, col in enumerate(states):
            total = PolyU.const(0)
            for k in range(N + 1):
                for S in combinations(range(N), k):
                    if any(row[i] != col[i] for i in range(N) if i not in S):
                        continue
                    coef = F.coefficient(tuple((levels[i], col[i], row[i]) for i in S))
                    if coef == 0:
                        continue
                    rest = PolyU.const(coef * kappa ** k)
                    for i in range(N):
                        if i not in S:
                            rest = rest * upolys[i]
                    total = total + rest
            out[r, c] = total
    return out


def _kron_power(m: np.ndarray, N: int) -> np.ndarray:
    out = np.array([[mpq(1)]], dtype=object)
    for _ in range(N):
        out = np.kron(out, m)
    return out


def removal_operator(m: int, n: int, j: int, tw: Twist, omega=None, t=None) -> np.ndarray:
    """``B_{m,n}`` applied to ``F = 1`` or ``F = w(t)`` as a dense matrix of polynomials.

    Slot ``m+1`` carries the commutator of ``u + 2Ĥ`` with multiplication by
    the eigenvalue ``x_j(g)``; the eigenvalue is differentiated as a function
    of the perturbed group element ``g = Ω⁻¹ diag(x) Ω``.
    """
    if tw.M:
        raise ValueError("eigenvalue removal is checked for bosonic twists")
    if m < 0 or n < 1 or m + n != tw.N:
        raise ValueError("need m >= 0, n >= 1 and m + n = N")
    if not 1 <= j <= tw.K:
        raise ValueError("j must be a bosonic index")
    N, q = tw.N, tw.n
    g, _, _ = _dense_twist(tw, omega)
    levels = _site_levels(N)
    Gfull = _perturbed(g, range(N))
    if t is None:
        F = NilJet.scalar(mpq(1))
    else:
        t = rat(t)
        zero, one = NilJet({}), NilJet.scalar(mpq(1))
        X = [[(one if a == b else zero) - Gfull[a][b] * t for b in range(q)] for a in range(q)]
        F = det_laplace(X, zero, one).inverse()
    xj = tw.xi_of(j)
    outer_with = [levels[i] for i in range(m + 1)]
    outer_without = [levels[i] for i in range(m)]
    x1 = _eigenvalue_jet(_perturbed(g, outer_with), xj, N)
    x2 = _eigenvalue_jet(_perturbed(g, outer_without), xj, N)
    return _dense_entries(F * x1 - F * x2, tw)


def check_removal(m: int, n: int, j: int, tw: Twist, omega=None, t=None) -> np.ndarray:
    """``C_{m,n} = (1 - g/x_j)^{⊗N} B_{m,n}``; vanishes identically."""
    g, _, _ = _dense_twist(tw, omega)
    xj = tw.xi_of(j)
    one = np.array([[mpq(1) if a == b else mpq(0) for b in range(tw.n)] for a in range(tw.n)],
                   dtype=object)
    proj = _kron_power(one - g * (1 / xj), tw.N)
    B = removal_operator(m, n, j, tw, omega, t)
    size = B.shape[0]
    out = np.empty_like(B)
    for r in range(size):
        for c in range(size):
            acc = PolyU.const(0)
            for k in range(size):
                if proj[r, k] != 0:
                    acc = acc + B[k, c] * proj[r, k]
            out[r, c] = acc
    return out
