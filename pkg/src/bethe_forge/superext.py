"""Graded (gl(K|M)) forms of the nested relations.

The engines in :mod:`coderiv` and :mod:`nesting` already read the grading
from the twist; this module supplies the relations whose shape depends on
whether the indices involved are bosonic or fermionic.
"""

from __future__ import annotations

import numpy as np
from gmpy2 import mpq

from .characters import young
from .coderiv import check_master
from .exactmath import det_laplace, rat
from .hilbert import NestingPath, TensorOperator, Twist, rat_inverse
from .nesting import (_iset, _with, check_tq, gen_series, q_operator, qq_form, t_sym, t_young)


def w_sdet(z, tw: Twist):
    """``1 / sdet(1 - z g)`` computed as a Berezinian of the block matrix."""
    z = rat(z)
    K, M = tw.K, tw.M
    n = K + M
    m = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            m[a, b] = 1 - z * tw.xi[a] if a == b else mpq(0)
    A, B, C, D = m[:K, :K], m[:K, K:], m[K:, :K], m[K:, K:]
    if M == 0:
        return 1 / det_laplace(A.tolist(), mpq(0), mpq(1))
    Dinv = rat_inverse(D)
    if Dinv is None:
        raise ZeroDivisionError("fermionic block of 1 - z g is singular")
    S = A - B.dot(Dinv).dot(C) if K else A
    detS = det_laplace(S.tolist(), mpq(0), mpq(1)) if K else mpq(1)
    return det_laplace(D.tolist(), mpq(0), mpq(1)) / detS


def check_graded_master(tw: Twist, z, t, pi=()) -> TensorOperator:
    """Master identity with Π factors carrying exponents ``±1`` (graded twists allowed)."""
    return check_master(tw, z, t, pi)


def check_tq_super(I, idx: int, s: int, tw: Twist) -> TensorOperator:
    """TQ residual for adding ``idx`` to ``I``.

    Bosonic ``idx`` uses the ordinary form.  Fermionic ``l`` swaps the roles
    of the two levels: ``T_{I,l}^s Q_I = T_I^s Q_{I,l} - y_l T_I^{s-1}(u+2) Q_{I,l}(u-2)``.
    """
    I = _iset(I)
    if idx in I:
        raise ValueError("idx must not be in I")
    if tw.parity(idx) == 0:
        return check_tq(I, idx, s, tw)
    Il = _with(I, idx)
    QI, QIl = q_operator(I, tw), q_operator(Il, tw)
    lhs = t_sym(Il, s, tw) * QI
    rhs = t_sym(I, s, tw) * QIl - t_sym(I, s - 1, tw).shift(2) * QIl.shift(-2) * tw.xi_of(idx)
    return lhs - rhs


def _qq_bf(QI, QIi, QIl, QIil, x, y) -> TensorOperator:
    return (QIl.shift(-2) * QIi * (x - y) - QI.shift(-2) * QIil * x + QI * QIil.shift(-2) * y)


def _qq_ff(QI, QIl, QIm, QIlm, yl, ym) -> TensorOperator:
    return (QIlm.shift(-2) * QI * (yl - ym) - QIl.shift(-2) * QIm * yl + QIl * QIm.shift(-2) * ym)


def check_qq_super(I, a: int, b: int, tw: Twist) -> TensorOperator:
    """QQ residual on the 4-cycle ``I, I+a, I+b, I+a+b``, dispatched on the gradings."""
    I = _iset(I)
    if a == b or a in I or b in I:
        raise ValueError("need distinct a, b outside I")
    pa, pb = tw.parity(a), tw.parity(b)
    if pa == 1 and pb == 0:
        a, b, pa, pb = b, a, pb, pa
    Q = lambda S: q_operator(S, tw)
    QI, QIa, QIb, QIab = Q(I), Q(_with(I, a)), Q(_with(I, b)), Q(_with(I, a, b))
    xa, xb = tw.xi_of(a), tw.xi_of(b)
    if pa == 0 and pb == 0:
        return qq_form(QI, QIa, QIb, QIab, xa, xb)
    if pa == 0:
        return _qq_bf(QI, QIa, QIb, QIab, xa, xb)
    return _qq_ff(QI, QIa, QIb, QIab, xa, xb)


def outside_fat_hook(lam, I, tw: Twist) -> bool:
    """True when ``λ_{n_b+1} > n_f`` for the bosonic/fermionic counts of ``I``."""
    lam = young(lam)
    I = _iset(I)
    nb = sum(1 for j in I if tw.parity(j) == 0)
    nf = len(I) - nb
    return len(lam) > nb and lam[nb] > nf


def check_fat_hook(lam, I, tw: Twist) -> bool:
    """Whether ``T_I^λ`` vanishes exactly when ``λ`` leaves the displaced fat hook."""
    T = t_young(I, lam, tw, method="direct")
    return T.is_zero() == outside_fat_hook(lam, I, tw)


def check_bosonization(I, i: int, l: int, tw: Twist, literal: bool = False) -> TensorOperator:
    """The boson-fermion QQ relation rewritten around ``J = I ∪ {l}``.

    In terms of ``J`` it is the bosonic QQ form with ``J ∖ l`` in the place
    of ``I, j``.  ``literal=True`` evaluates the variant whose last term uses
    ``Q_J(u-2)`` instead of ``Q_{J,i}(u-2)``; it does not vanish and is kept
    only as a diagnostic.
    """
    I = _iset(I)
    if tw.parity(i) != 0 or tw.parity(l) != 1:
        raise ValueError("need a bosonic i and a fermionic l")
    if i in I or l in I:
        raise ValueError("i and l must not be in I")
    J = _with(I, l)
    Q = lambda S: q_operator(S, tw)
    QJ, QJi = Q(J), Q(_with(J, i))
    QJl, QJil = Q(I), Q(_with(I, i))
    x, y = tw.xi_of(i), tw.xi_of(l)
    if not literal:
        return qq_form(QJ, QJi, QJl, QJil, x, y)
    return QJ.shift(-2) * QJil * (x - y) - QJl.shift(-2) * QJi * x + QJl * QJ.shift(-2) * y


def gen_series_super(path: NestingPath, tw: Twist, sMax: int) -> list:
    """Symmetric T-operators of the full set along a graded nesting path."""
    return gen_series(path, tw, sMax)
