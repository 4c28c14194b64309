import random
from itertools import combinations, combinations_with_replacement, permutations

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from bethe_forge.characters import (check_char_hirota, chi_rect, chi_series, chi_sym, chi_young,
                                    gen_w, rectangle, young)
from bethe_forge.errors import PoleHit
from bethe_forge.exactmath import perm_sign
from bethe_forge.hilbert import Twist, complement

from conftest import SMALL


def chi_monomial(s, xs, ys=()):
    """Oracle: z^s coefficient of ∏(1-zy)/∏(1-zx) by explicit monomial sums."""
    if s < 0:
        return mpq(0)
    total = mpq(0)
    for k in range(min(s, len(ys)) + 1):
        e = mpq(0)
        for c in combinations(ys, k):
            m = mpq(1)
            for y in c:
                m *= y
            e += m
        h = mpq(0)
        for c in combinations_with_replacement(xs, s - k):
            m = mpq(1)
            for x in c:
                m *= x
            h += m
        total += (-1) ** k * e * h
    return total


def schur_bialternant(lam, xs):
    """Oracle: det(x_i^{λ_j + n - j}) / det(x_i^{n - j})."""
    n = len(xs)
    lam = tuple(lam) + (0,) * (n - len(lam))
    if len(lam) > n:
        return mpq(0)

    def alt(exps):
        tot = mpq(0)
        for p in permutations(range(n)):
            m = mpq(perm_sign(p))
            for i in range(n):
                m *= xs[p[i]] ** exps[i]
            tot += m
        return tot
    return alt([lam[j] + n - 1 - j for j in range(n)]) / alt([n - 1 - j for j in range(n)])


twists = st.integers(1, 3).flatmap(
    lambda K: st.lists(st.sampled_from(SMALL), min_size=K, max_size=K, unique=True)
).map(lambda xs: Twist.make(xs, (0,)))

partitions = st.lists(st.integers(1, 3), max_size=3).map(lambda v: tuple(sorted(v, reverse=True)))


# -- generating function -------------------------------------------------------

def test_gen_w_examples():
    tw = Twist.make((2, 3), (0,))
    assert gen_w(mpq(1, 7), tw, (1, 2)) == mpq(49, 20)
    assert gen_w(mpq(5, 11), tw, ()) == 1
    sup = Twist.make((2,), (0,), y=(3,))
    assert gen_w(mpq(1, 4), sup) == mpq(1, 2)


def test_gen_w_pole():
    tw = Twist.make((2, 3), (0,))
    with pytest.raises(PoleHit):
        gen_w(mpq(1, 3), tw)
    # the pole of an index outside I is harmless
    assert gen_w(mpq(1, 3), tw, (1,)) == 3


@given(twists, st.fractions(min_value=-1, max_value=1, max_denominator=50))
def test_gen_w_factorizes(tw, z):
    z = mpq(z.numerator, z.denominator)
    if any(1 - z * x == 0 for x in tw.xi):
        return
    for r in range(tw.n + 1):
        for I in combinations(tw.full_set(), r):
            assert gen_w(z, tw) == gen_w(z, tw, I) * gen_w(z, tw, complement(I, tw))


# -- symmetric characters ------------------------------------------------------

def test_chi_sym_examples():
    tw = Twist.make((2, 3), (0,))
    assert [chi_sym(s, tw) for s in range(3)] == [1, 5, 19]
    assert chi_sym(-1, tw) == 0


def test_character_backlund_step():
    tw = Twist.make((2, 3), (0,))
    assert chi_sym(2, tw, (1,)) == chi_sym(2, tw) - 3 * chi_sym(1, tw) == 4


@pytest.mark.parametrize("K", [1, 2, 3])
def test_chi_sym_matches_monomial_oracle(K):
    rng = random.Random(K)
    for _ in range(5):
        xs = rng.sample(SMALL, K)
        tw = Twist.make(xs, (0,))
        for s in range(6):
            assert chi_sym(s, tw) == chi_monomial(s, xs)


@pytest.mark.parametrize("K,M", [(1, 1), (2, 1), (1, 2), (2, 2)])
def test_super_chi_matches_monomial_oracle(K, M):
    rng = random.Random(10 * K + M)
    vals = rng.sample(SMALL, K + M)
    tw = Twist.make(vals[:K], (0,), y=vals[K:])
    for s in range(6):
        assert chi_sym(s, tw) == chi_monomial(s, vals[:K], vals[K:])


def test_series_is_consistent():
    tw = Twist.make((2, 3, 5), (0,))
    ser = chi_series(5, tw)
    assert ser == [chi_sym(s, tw) for s in range(6)]
    assert chi_series(-1, tw) == []


# -- Jacobi-Trudi --------------------------------------------------------------

def test_chi_young_examples():
    tw = Twist.make((2, 3), (0,))
    assert chi_young((1, 1), tw) == 6
    assert chi_young((), tw) == 1
    assert chi_young((1, 1, 1), tw) == 0


@given(twists, partitions)
@settings(max_examples=60)
def test_jacobi_trudi_matches_bialternant(tw, lam):
    assert chi_young(lam, tw) == schur_bialternant(lam, list(tw.xi))


@given(twists, st.integers(0, 6))
def test_single_row_reduces_to_chi_sym(tw, s):
    assert chi_young((s,) if s else (), tw) == chi_sym(s, tw)


def test_super_with_no_fermions_is_bosonic():
    bos = Twist.make((2, 5), (0,))
    same = Twist(2, 0, (2, 5), (0,))
    for lam in [(1,), (2, 1), (3, 1, 1)]:
        assert chi_young(lam, bos) == chi_young(lam, same)


def test_young_validation():
    assert young((2, 1, 0)) == (2, 1)
    with pytest.raises(ValueError):
        young((1, 2))
    assert rectangle(2, 3) == (3, 3) and rectangle(0, 3) == ()


# -- Hirota --------------------------------------------------------------------

def test_char_hirota_examples():
    assert check_char_hirota(1, 1, Twist.make((2, 3), (0,))) == 0
    rng = random.Random(4)
    tw3 = Twist.make(rng.sample(SMALL, 3), (0,))
    assert check_char_hirota(2, 2, tw3) == 0
    assert check_char_hirota(1, 1, Twist.make((2,), (0,))) == 0


@given(twists, st.integers(1, 3), st.integers(1, 3))
@settings(max_examples=40)
def test_char_hirota_property(tw, a, s):
    assert check_char_hirota(a, s, tw) == 0


def test_char_hirota_super():
    tw = Twist.make((2, 3), (0,), y=(5,))
    for a in (1, 2):
        for s in (1, 2):
            assert check_char_hirota(a, s, tw) == 0


def test_char_hirota_negative_control():
    """A wrong relative sign does not vanish, so the check has teeth."""
    tw = Twist.make((2, 3), (0,))
    c = lambda a, s: chi_rect(a, s, tw)
    assert c(1, 2) * c(1, 0) - c(1, 1) ** 2 - c(0, 1) * c(2, 1) != 0
