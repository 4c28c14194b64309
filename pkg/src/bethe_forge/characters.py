"""Characters of the twist: ``w(z)``, symmetric characters and Jacobi-Trudi.

Index sets are 1-based; an index ``j <= K`` is bosonic (eigenvalue ``x_j``),
larger indices are fermionic (eigenvalue ``y``).
"""

from __future__ import annotations

from typing import Sequence

from gmpy2 import mpq

from .errors import PoleHit
from .exactmath import Rat, det_laplace, rat


def young(lam: Sequence[int]) -> tuple:
    """Validate a Young diagram; trailing zeros are dropped."""
    lam = tuple(int(v) for v in lam)
    while lam and lam[-1] == 0:
        lam = lam[:-1]
    if any(v <= 0 for v in lam) or any(a < b for a, b in zip(lam, lam[1:])):
        raise ValueError(f"not a Young diagram: {lam}")
    return lam


def rectangle(a: int, s: int) -> tuple:
    """The ``a × s`` rectangle ``(s^a)``; empty if either side is zero."""
    return (s,) * a if a > 0 and s > 0 else ()


def _split(tw, I) -> tuple:
    I = tuple(sorted(set(I)))
    bos = [tw.xi_of(j) for j in I if tw.parity(j) == 0]
    fer = [tw.xi_of(j) for j in I if tw.parity(j) == 1]
    return bos, fer


def gen_w(z, tw, I=None) -> Rat:
    """``w_I(z) = ∏_{fermionic j∈I}(1 - z y_j) / ∏_{bosonic j∈I}(1 - z x_j)``."""
    z = rat(z)
    I = tw.full_set() if I is None else I
    bos, fer = _split(tw, I)
    out = mpq(1)
    for y in fer:
        out *= 1 - z * y
    for x in bos:
        d = 1 - z * x
        if d == 0:
            raise PoleHit(f"z = {z} is 1/x for an eigenvalue in I")
        out /= d
    return out


def chi_series(smax: int, tw, I=None) -> list:
    """``[χ_0, ..., χ_smax]`` of ``g_I`` by repeated convolution."""
    I = tw.full_set() if I is None else I
    bos, fer = _split(tw, I)
    coef = [mpq(0)] * (smax + 1)
    if smax < 0:
        return []
    coef[0] = mpq(1)
    for x in bos:
        for n in range(1, smax + 1):
            coef[n] += x * coef[n - 1]
    for y in fer:
        for n in range(smax, 0, -1):
            coef[n] -= y * coef[n - 1]
    return coef


def chi_sym(s: int, tw, I=None) -> Rat:
    """``χ_s(g_I)``, the ``z^s`` coefficient of ``w_I(z)``; zero for ``s < 0``."""
    if s < 0:
        return mpq(0)
    return chi_series(s, tw, I)[s]


def chi_young(lam: Sequence[int], tw, I=None) -> Rat:
    """``χ_λ(g_I) = det(χ_{λ_j + k - j})`` (Jacobi-Trudi)."""
    lam = young(lam)
    a = len(lam)
    if a == 0:
        return mpq(1)
    smax = lam[0] + a
    ch = chi_series(smax, tw, I)
    get = lambda s: ch[s] if 0 <= s <= smax else mpq(0)
    mat = [[get(lam[j] + k - j) for k in range(a)] for j in range(a)]
    return det_laplace(mat, mpq(0), mpq(1))


def chi_rect(a: int, s: int, tw, I=None) -> Rat:
    """``χ^{(a,s)}`` with the boundary value ``1`` when ``a = 0`` or ``s = 0``."""
    if a < 0 or s < 0:
        return mpq(0)
    return chi_young(rectangle(a, s), tw, I)


def check_char_hirota(a: int, s: int, tw, I=None) -> Rat:
    """``χ^{(a,s+1)}χ^{(a,s-1)} - χ^{(a,s)}² + χ^{(a-1,s)}χ^{(a+1,s)}`` (zero)."""
    c = lambda aa, ss: chi_rect(aa, ss, tw, I)
    return c(a, s + 1) * c(a, s - 1) - c(a, s) ** 2 + c(a - 1, s) * c(a + 1, s)

