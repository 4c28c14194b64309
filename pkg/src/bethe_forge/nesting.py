"""Nested Q- and T-operators and the functional relations between them.

``Q_I`` and ``T_I^λ`` are residues of co-derivative expressions at
``t_j = 1/ξ_j`` for every removed index ``j ∈ Ī``.  The default
construction evaluates those residues in closed form
(:func:`coderiv.expand_entries` with pole factors); ``method="jet"``
instead carries each ``t_j`` as a Laurent jet through the nilpotent-jet
engine and takes the limits one variable at a time.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from typing import Sequence

from gmpy2 import mpq

from .characters import rectangle, young
from .coderiv import (WFormal, WPole, WSpec, _op_det, _jt_exponents, coderivative_jet_entries,
                      expand_entries, phi_poly, series_operators)
from .errors import ConfigError, DegreeOverflow, InsufficientPrecision
from .exactmath import LaurentJet, PolyU, TruncSeries, det_laplace, laurent_limit
from .hilbert import (NestingPath, TensorOperator, Twist, complement, op_divide, sector_layout,
                      subset_label, subset_mask)


def _iset(I) -> tuple:
    return tuple(sorted(set(int(j) for j in I)))


def nesting_shift(I, tw: Twist) -> int:
    """``2 n_b̄ - 2 n_f̄`` for the removed indices ``Ī``."""
    bar = complement(I, tw)
    nb = sum(1 for j in bar if tw.parity(j) == 0)
    return 2 * nb - 2 * (len(bar) - nb)


def _check_degree(op: TensorOperator, tw: Twist) -> TensorOperator:
    if op.degree > tw.N:
        raise DegreeOverflow(f"degree {op.degree} exceeds N = {tw.N}")
    return op


# ---------------------------------------------------------------------------
# Normalization and the jet route


def _tower(tw: Twist, order: Sequence[int], prec: int) -> dict:
    """``{j: t_j}`` with ``t_j`` a jet in the variable at position ``order.index(j)``.

    Position 0 is the outermost variable, i.e. the first limit taken.
    """
    out = {}
    depth_of = {j: d for d, j in enumerate(order)}
    for j in order:
        d = depth_of[j]
        jet = LaurentJet({0: 1 / tw.xi_of(j), 1: mpq(1)}, prec=prec)
        for _ in range(d):
            jet = LaurentJet({0: jet})
        out[j] = jet
    return out


def normalizer(I, tw: Twist, tAssign: dict | None = None) -> dict:
    """Diagonal of ``B_Ī = ∏_{j∈Ī} (1 - ξ_j t_j)(1 - g t_j)^{⊗N}``.

    Returns ``{basis tuple (0-based): value}``; values are jets when the
    ``t_j`` in ``tAssign`` are jets, and ``1`` everywhere when ``Ī`` is empty.
    """
    bar = complement(_iset(I), tw)
    if tAssign is None:
        tAssign = _tower(tw, bar, prec=tw.N + 3)
    out = {}
    for basis in sector_layout(tw.n, tw.N).values():
        for row in basis:
            v = mpq(1)
            for j in bar:
                t = tAssign[j]
                v = (1 - t * tw.xi_of(j)) * v
                for k in row:
                    v = (1 - t * tw.xi[k]) * v
            out[row] = v
    return out


def _full_limit(v):
    while isinstance(v, LaurentJet):
        v = laurent_limit(v)
    return v


def _q_jet(I, tw: Twist, order: Sequence[int] | None, prec: int) -> TensorOperator:
    bar = complement(I, tw)
    if not bar:
        return TensorOperator.scalar(phi_poly(tw), tw.n, tw.N)
    order = list(bar) if order is None else list(order)
    if sorted(order) != list(bar):
        raise ValueError("limit order must list the removed indices")
    ts = _tower(tw, order, prec)
    tlist = tuple((ts[j], 1 if tw.parity(j) == 0 else -1) for j in bar)
    ent = coderivative_jet_entries(WSpec(tw, nesting_shift(I, tw), tlist))
    B = normalizer(I, tw, ts)
    out = {}
    for (row, col), v in ent.items():
        val = _full_limit(B[row] * v)
        out[(row, col)] = val if isinstance(val, PolyU) else PolyU.const(val)
    return TensorOperator.from_entries(tw.n, tw.N, out)


# ---------------------------------------------------------------------------
# Q and T operators


@lru_cache(maxsize=4096)
def _q_cached(I: tuple, tw: Twist) -> TensorOperator:
    bar = complement(I, tw)
    if not bar:
        return TensorOperator.scalar(phi_poly(tw), tw.n, tw.N)
    ent = expand_entries(tw, nesting_shift(I, tw), [WPole(j) for j in bar])
    return _check_degree(TensorOperator.from_entries(tw.n, tw.N, ent), tw)


def q_operator(I, tw: Twist, method: str = "residue", order: Sequence[int] | None = None,
               prec: int | None = None) -> TensorOperator:
    """``Q_I(u)``.

    ``method="jet"`` takes the limits ``t_j → 1/ξ_j`` one at a time in the
    given ``order`` (ascending by default) using nested Laurent jets.
    """
    I = _iset(I)
    if method == "residue":
        return _q_cached(I, tw)
    if method != "jet":
        raise ValueError(f"unknown method {method!r}")
    p = prec if prec is not None else 2 * tw.N + 4
    for _ in range(4):
        try:
            return _check_degree(_q_jet(I, tw, order, p), tw)
        except InsufficientPrecision:
            p += tw.N + 2
    raise InsufficientPrecision("jet limits did not converge in precision")


def _bar_prefactor(I, tw: Twist, var: int, caps: tuple) -> TruncSeries:
    """``1 / w_Ī(z_var)`` as a series."""
    bar = complement(I, tw)
    numer = [tw.xi_of(j) for j in bar if tw.parity(j) == 0]
    denom = [tw.xi_of(j) for j in bar if tw.parity(j) == 1]
    return TruncSeries.from_factors(var, numer, denom, caps)


@lru_cache(maxsize=4096)
def _t_sym_list(I: tuple, tw: Twist, smax: int) -> tuple:
    bar = complement(I, tw)
    caps = (smax,)
    factors = [WFormal(0)] + [WPole(j) for j in bar]
    pre = _bar_prefactor(I, tw, 0, caps)
    ops = series_operators(tw, nesting_shift(I, tw), factors, caps,
                           [(s,) for s in range(smax + 1)], prefactor=pre)
    return tuple(_check_degree(ops[(s,)], tw) for s in range(smax + 1))


def t_sym(I, s: int, tw: Twist) -> TensorOperator:
    """Symmetric nested ``T_I^s(u)``; zero for ``s < 0``, ``Q_I`` for ``s = 0``."""
    I = _iset(I)
    if s < 0:
        return TensorOperator.zero(tw.n, tw.N)
    return _t_sym_list(I, tw, s)[s]


def t_sym_series(I, smax: int, tw: Twist) -> list:
    """``[T_I^0, ..., T_I^smax]`` from one expansion."""
    return list(_t_sym_list(_iset(I), tw, smax))


def _t_young_direct(I: tuple, lam: tuple, tw: Twist) -> TensorOperator:
    terms = list(_jt_exponents(lam))
    if not terms:
        return TensorOperator.zero(tw.n, tw.N)
    a = len(lam)
    caps = tuple(max(e[r] for _, e in terms) for r in range(a))
    bar = complement(I, tw)
    pre = TruncSeries.const(1, caps)
    for r in range(a):
        pre = pre * _bar_prefactor(I, tw, r, caps)
    factors = [WFormal(r) for r in range(a)] + [WPole(j) for j in bar]
    ops = series_operators(tw, nesting_shift(I, tw), factors, caps,
                           {e for _, e in terms}, prefactor=pre)
    out = TensorOperator.zero(tw.n, tw.N)
    for sgn, e in terms:
        out = out + ops[e] if sgn > 0 else out - ops[e]
    return out


@lru_cache(maxsize=4096)
def _t_young_br(I: tuple, lam: tuple, tw: Twist) -> TensorOperator:
    a = len(lam)
    smax = lam[0] + a - 1
    syms = t_sym_series(I, smax, tw)
    zero = TensorOperator.zero(tw.n, tw.N)
    T = lambda s: syms[s] if 0 <= s <= smax else zero
    mat = [[T(lam[j] + k - j).shift(-2 * k) for k in range(a)] for j in range(a)]
    num = _op_det(mat, tw.N, tw.n)
    if a == 1:
        return num
    Q = q_operator(I, tw)
    den = Q.shift(-2)
    for k in range(2, a):
        den = den * Q.shift(-2 * k)
    return op_divide(num, den)


def t_young(I, lam, tw: Twist, method: str = "br") -> TensorOperator:
    """Nested ``T_I^λ(u)`` for any Young diagram.

    ``method="br"`` uses the determinant of symmetric ``T_I^s`` divided
    exactly by ``∏_{k=1}^{a-1} Q_I(u-2k)``; ``method="direct"`` expands the
    Jacobi-Trudi determinant inside the residue construction.
    """
    I = _iset(I)
    lam = young(lam)
    if not lam:
        return q_operator(I, tw)
    if method == "br":
        return _t_young_br(I, lam, tw)
    if method == "direct":
        return _t_young_direct(I, lam, tw)
    raise ValueError(f"unknown method {method!r}")


def t_rect(I, a: int, s: int, tw: Twist) -> TensorOperator:
    """``T_I^{(a,s)}`` with ``T^{(0,s)} = T^{(a,0)} = Q_I`` and zero for negative labels."""
    if a < 0 or s < 0:
        return TensorOperator.zero(tw.n, tw.N)
    if a == 0 or s == 0:
        return q_operator(I, tw)
    return t_young(I, rectangle(a, s), tw)


# ---------------------------------------------------------------------------
# Relations


def _with(I, *js) -> tuple:
    return _iset(tuple(I) + tuple(js))


def _without(I, j) -> tuple:
    return tuple(k for k in _iset(I) if k != j)


def check_tq(I, j: int, s: int, tw: Twist) -> TensorOperator:
    """Residual of ``T_I^s Q_{I,j} = T_{I,j}^s Q_I - ξ_j T_{I,j}^{s-1}(u+2) Q_I(u-2)``."""
    I = _iset(I)
    if j in I:
        raise ValueError("j must not be in I")
    Ij = _with(I, j)
    QI, QIj = q_operator(I, tw), q_operator(Ij, tw)
    lhs = t_sym(I, s, tw) * QIj
    rhs = t_sym(Ij, s, tw) * QI - t_sym(Ij, s - 1, tw).shift(2) * QI.shift(-2) * tw.xi_of(j)
    return lhs - rhs


def qq_form(QI, QIi, QIj, QIij, xi, xj) -> TensorOperator:
    """``(x_i-x_j) Q_I(u-2) Q_{Iij} - x_i Q_{Ij}(u-2) Q_{Ii} + x_j Q_{Ij} Q_{Ii}(u-2)``."""
    return (QI.shift(-2) * QIij * (xi - xj) - QIj.shift(-2) * QIi * xi + QIj * QIi.shift(-2) * xj)


def check_qq(I, i: int, j: int, tw: Twist) -> TensorOperator:
    """Residual of the bosonic QQ-relation for ``i ≠ j ∉ I``."""
    I = _iset(I)
    if i == j or i in I or j in I:
        raise ValueError("need distinct i, j outside I")
    Q = lambda S: q_operator(S, tw)
    return qq_form(Q(I), Q(_with(I, i)), Q(_with(I, j)), Q(_with(I, i, j)), tw.xi_of(i), tw.xi_of(j))


def wronskian_q(I, J, tw: Twist) -> TensorOperator:
    """``Q_{I∪J}`` rebuilt from ``{Q_{I,j}}_{j∈J}`` and ``Q_I`` by the determinant formula."""
    I, J = _iset(I), _iset(J)
    if set(I) & set(J):
        raise ValueError("I and J must be disjoint")
    n = len(J)
    if n == 0:
        return q_operator(I, tw)
    xs = [tw.xi_of(j) for j in J]
    mat = [[q_operator(_with(I, j), tw).shift(-2 * k) * xs[r] ** (n - 1 - k) for k in range(n)]
           for r, j in enumerate(J)]
    num = _op_det(mat, tw.N, tw.n)
    vdm = det_laplace([[x ** (n - 1 - k) for k in range(n)] for x in xs], mpq(0), mpq(1))
    num = num * (1 / vdm)
    if n == 1:
        return num
    QI = q_operator(I, tw)
    den = QI.shift(-2)
    for k in range(2, n):
        den = den * QI.shift(-2 * k)
    return op_divide(num, den)


def check_hirota(I, a: int, s: int, tw: Twist) -> TensorOperator:
    """Residual of the Hirota equation for rectangular nested ``T_I^{(a,s)}``."""
    T = lambda aa, ss: t_rect(I, aa, ss, tw)
    h = mpq(1)
    lhs = T(a, s).shift(h) * T(a, s).shift(-h)
    rhs = T(a + 1, s).shift(h) * T(a - 1, s).shift(-h) + T(a, s + 1).shift(-h) * T(a, s - 1).shift(h)
    return lhs - rhs


def check_bt(I, j: int, a: int, s: int, tw: Twist) -> tuple:
    """Residuals of the two bilinear relations linking ``T_I`` and ``T_{I,j}``."""
    I = _iset(I)
    if j in I:
        raise ValueError("j must not be in I")
    Ij = _with(I, j)
    A = lambda aa, ss: t_rect(Ij, aa, ss, tw)
    B = lambda aa, ss: t_rect(I, aa, ss, tw)
    x = tw.xi_of(j)
    r1 = (A(a + 1, s) * B(a, s) - A(a, s) * B(a + 1, s)
          - A(a + 1, s - 1).shift(2) * B(a, s + 1).shift(-2) * x)
    r2 = (A(a, s + 1) * B(a, s) - A(a, s) * B(a, s + 1)
          - A(a + 1, s).shift(2) * B(a - 1, s + 1).shift(-2) * x)
    return r1, r2


# ---------------------------------------------------------------------------
# Generating series along a nesting path


def series_step(Qprev: TensorOperator, Qnext: TensorOperator, Tprev: list, Tnext_lower,
                xi, fermionic: bool, s: int) -> TensorOperator:
    """One step ``T^s_{I_{k-1}} → T^s_{I_k}`` of the generating-series recursion.

    Bosonic: ``Q_{k-1} T^s_k = Q_k T^s_{k-1} + ξ Q_{k-1}(u-2) T^{s-1}_k(u+2)``.
    Fermionic: ``Q_{k-1} T^s_k = Q_k T^s_{k-1} - ξ Q_k(u-2) T^{s-1}_{k-1}(u+2)``.
    """
    if fermionic:
        num = Qnext * Tprev[s]
        if s >= 1:
            num = num - Qnext.shift(-2) * Tprev[s - 1].shift(2) * xi
    else:
        num = Qnext * Tprev[s]
        if s >= 1:
            num = num + Qprev.shift(-2) * Tnext_lower.shift(2) * xi
    return op_divide(num, Qprev)


def gen_series(path: NestingPath, tw: Twist, smax: int) -> list:
    """``[T^0, ..., T^smax]`` of the full set, rebuilt level by level along ``path``.

    Each step divides exactly by the previous level's ``Q`` and the cleared
    identity ``Q_{k-1} T^s_k = ...`` is re-checked on the result.
    """
    if sorted(path.order) != list(tw.full_set()):
        raise ValueError("the path must end at the full index set")
    subsets = path.subsets()
    Qs = [q_operator(S, tw) for S in subsets]
    T = [Qs[0]] + [TensorOperator.zero(tw.n, tw.N)] * smax
    for k in range(1, len(subsets)):
        j = path.order[k - 1]
        ferm = tw.parity(j) == 1
        nxt = []
        for s in range(smax + 1):
            nxt.append(series_step(Qs[k - 1], Qs[k], T, nxt[s - 1] if s else None,
                                   tw.xi_of(j), ferm, s))
        T = nxt
    return T


def gen_series_t(path: NestingPath, tw: Twist, sMax: int) -> list:
    """Symmetric T-operators of the full set from the Q-operators along ``path`` (bosonic)."""
    if tw.M:
        raise ValueError("graded twists go through superext.gen_series_super")
    return gen_series(path, tw, sMax)


def t1_from_path(path: NestingPath, tw: Twist) -> TensorOperator:
    """``T^1`` of the full set from the Q-operators along ``path``.

    The sum ``Q_full Σ_k (-1)^p ξ Q_{k-1}(u∓2) Q_k(u±2) / (Q_{k-1} Q_k)`` is
    multiplied through by ``∏_k Q_{I_k}`` (all commute) and divided exactly
    at the end.
    """
    subsets = path.subsets()
    Qs = [q_operator(S, tw) for S in subsets]
    n = len(subsets) - 1
    total = TensorOperator.zero(tw.n, tw.N)
    for k in range(1, n + 1):
        j = path.order[k - 1]
        sg = 1 if tw.parity(j) == 0 else -1
        term = Qs[k - 1].shift(-2 * sg) * Qs[k].shift(2 * sg) * (sg * tw.xi_of(j))
        for m in range(0, n + 1):
            if m not in (k - 1, k):
                term = term * Qs[m]
        total = total + term
    den = Qs[0]
    for m in range(1, n + 1):
        den = den * Qs[m]
    return op_divide(total * Qs[n], den)


# ---------------------------------------------------------------------------
# Hasse diagram


def hasse_export(tw: Twist, highlight: NestingPath | None = None, max_size: int = 6) -> str:
    """DOT text of the inclusion lattice of index sets labelling ``Q_I``.

    Nodes are bitmasks labelled by the subscript; an edge ``I → I∪{j}`` is
    solid for bosonic ``j`` and dashed for fermionic ``j``.
    """
    n = tw.n
    if n > max_size:
        raise ConfigError(f"Hasse export is limited to K+M <= {max_size}")
    full = tw.full_set()
    subsets = [S for r in range(n + 1) for S in combinations(full, r)]
    subsets.sort(key=lambda S: (len(S), subset_mask(S)))
    hl_edges = set()
    if highlight is not None:
        chain = highlight.subsets()
        hl_edges = {(subset_mask(a), subset_mask(b)) for a, b in zip(chain, chain[1:])}
    lines = ["digraph hasse {", "  rankdir=BT;", "  node [shape=plaintext];"]
    for S in subsets:
        lines.append(f'  {subset_mask(S)} [label="Q_{{{subset_label(S)}}}"];')
    for S in subsets:
        for j in full:
            if j in S:
                continue
            T = _iset(S + (j,))
            a, b = subset_mask(S), subset_mask(T)
            attrs = ["style=solid" if tw.parity(j) == 0 else "style=dashed"]
            if (a, b) in hl_edges:
                attrs += ["color=red", "penwidth=3"]
            lines.append(f"  {a} -> {b} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
