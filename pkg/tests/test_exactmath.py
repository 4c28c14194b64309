import random
from fractions import Fraction

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from bethe_forge.errors import ExactDivisionFailed, InsufficientPrecision, NonvanishingPole
from bethe_forge.exactmath import (LaurentJet, NilJet, PolyU, TruncSeries, det_laplace,
                                   laurent_limit, niljet_mul, perm_sign, poly_mul, rat, rat_str)

U = PolyU.var()
small_ints = st.integers(min_value=-9, max_value=9)
polys = st.lists(small_ints, min_size=0, max_size=5).map(PolyU)
fracs = st.fractions(min_value=-50, max_value=50, max_denominator=40)


# -- rationals ---------------------------------------------------------------

def test_rat_coercions():
    assert rat("6/4") == mpq(3, 2)
    assert rat(Fraction(-2, 6)) == mpq(-1, 3)
    assert rat(7) == mpq(7)
    assert rat_str(mpq(3, 2)) == "3/2" and rat_str(mpq(-4)) == "-4"
    with pytest.raises(TypeError):
        rat(0.5)
    with pytest.raises(TypeError):
        rat(True)


def test_rat_is_reduced():
    q = rat("-10/4")
    assert q.denominator > 0
    assert q == mpq(-5, 2)


@given(fracs, fracs)
@settings(max_examples=200)
def test_rat_sum_matches_integer_arithmetic(a, b):
    got = rat(a) + rat(b)
    num = a.numerator * b.denominator + b.numerator * a.denominator
    den = a.denominator * b.denominator
    assert Fraction(int(got.numerator), int(got.denominator)) == Fraction(num, den)


def test_rat_random_pairs_brute_force():
    rng = random.Random(3)
    for _ in range(1000):
        a, b = rng.randint(-99, 99), rng.randint(1, 99)
        c, d = rng.randint(-99, 99), rng.randint(1, 99)
        assert mpq(a, b) + mpq(c, d) == mpq(a * d + c * b, b * d)


def test_perm_sign():
    assert perm_sign((0, 1, 2)) == 1
    assert perm_sign((1, 0, 2)) == -1
    assert perm_sign((1, 2, 0)) == 1


def test_det_laplace_matches_fraction_gauss():
    m = [[mpq(2), mpq(1, 3), mpq(-1)], [mpq(0), mpq(5), mpq(2)], [mpq(4, 7), mpq(1), mpq(3)]]
    want = (2 * (5 * 3 - 2 * 1) - mpq(1, 3) * (0 * 3 - 2 * mpq(4, 7))
            + (-1) * (0 * 1 - 5 * mpq(4, 7)))
    assert det_laplace(m, mpq(0), mpq(1)) == want
    assert det_laplace([], mpq(0), mpq(1)) == 1


# -- polynomials -------------------------------------------------------------

def test_poly_mul_examples():
    assert poly_mul(U, U + 2) == PolyU((0, 2, 1))
    p = PolyU((3, -1, 4))
    assert poly_mul(p, PolyU.const(1)) == p
    assert poly_mul(U - 1, U + 1) == PolyU((-1, 0, 1))


def test_zero_poly_conventions():
    z = PolyU()
    assert z.is_zero() and z.degree == -1
    assert PolyU((1, 2, 0, 0)).degree == 1


@given(polys, polys)
def test_degree_is_additive(p, q):
    r = p * q
    if p.is_zero() or q.is_zero():
        assert r.is_zero()
    else:
        assert r.degree == p.degree + q.degree


@given(polys, polys, polys)
def test_poly_ring_axioms(p, q, r):
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r


@given(polys, st.fractions(min_value=-5, max_value=5, max_denominator=5),
       st.fractions(min_value=-5, max_value=5, max_denominator=5))
def test_shift_is_evaluation_shift(p, s, x):
    assert p.shift(rat(s))(rat(x)) == p(rat(x) + rat(s))


@given(polys, polys.filter(lambda q: not q.is_zero()))
def test_divmod_reconstructs(p, q):
    quo, rem = p.divmod(q)
    assert quo * q + rem == p
    assert rem.degree < q.degree


def test_exact_div_failure():
    assert (U * U - 1).exact_div(U - 1) == U + 1
    with pytest.raises(ExactDivisionFailed):
        (U * U + 1).exact_div(U - 1)


def test_poly_text_roundtrip():
    p = PolyU((mpq(-1, 2), 0, 3))
    assert PolyU.parse(str(p)) == p


# -- Laurent jets ------------------------------------------------------------

def test_laurent_limit_examples():
    assert laurent_limit(LaurentJet({0: mpq(5)})) == 5
    assert laurent_limit(LaurentJet({-1: mpq(0), 0: mpq(3), 1: mpq(7)}, window=(-1, 1))) == 3
    with pytest.raises(NonvanishingPole):
        laurent_limit(LaurentJet({-1: mpq(2), 0: mpq(3)}))


def test_laurent_precision_is_tracked():
    eps = LaurentJet({1: mpq(1)}, prec=3)
    inv = eps.inverse()
    assert inv[-1] == 1
    with pytest.raises(InsufficientPrecision):
        (inv * inv)[2]
    with pytest.raises(InsufficientPrecision):
        laurent_limit(LaurentJet({-2: mpq(0)}, prec=-1))


def test_laurent_pole_cancellation():
    # (1 - 3t) / (1 - 3t) at t = 1/3 + eps: pole and zero cancel exactly
    t = LaurentJet({0: mpq(1, 3), 1: mpq(1)}, prec=6)
    num = 1 - t * 3
    assert laurent_limit(num * num.inverse()) == 1


@given(st.fractions(min_value=-5, max_value=5, max_denominator=7),
       st.fractions(min_value=-5, max_value=5, max_denominator=7))
def test_laurent_limit_commutes_with_scaling(a, c):
    j = LaurentJet({0: rat(a), 1: mpq(2), 2: mpq(-1)}, prec=4)
    assert laurent_limit(j * rat(c)) == rat(c) * laurent_limit(j)


# -- nilpotent jets ----------------------------------------------------------

def gen(level, a, b):
    return NilJet.generator(level, a, b)


def test_niljet_same_level_cross_terms_vanish():
    one = NilJet.scalar(mpq(1))
    got = niljet_mul(one + gen(0, 0, 1), one + gen(0, 1, 0))
    assert got == one + gen(0, 0, 1) + gen(0, 1, 0)


def test_niljet_identity():
    a = NilJet.scalar(mpq(3)) + gen(1, 0, 0) * mpq(2)
    assert niljet_mul(a, NilJet.scalar(mpq(1))) == a


def test_niljet_distinct_levels_survive():
    one = NilJet.scalar(mpq(1))
    got = niljet_mul(one + gen(0, 0, 0), one + gen(1, 0, 0))
    want = one + gen(0, 0, 0) + gen(1, 0, 0) + gen(0, 0, 0) * gen(1, 0, 0)
    assert got == want
    assert got.coefficient(((0, 0, 0), (1, 0, 0))) == 1


jet_terms = st.lists(
    st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2), st.integers(-3, 3)),
    max_size=4)


def build(terms, body):
    out = NilJet.scalar(mpq(body))
    for lvl, a, b, c in terms:
        out = out + gen(lvl, a, b) * mpq(c)
    return out


@given(jet_terms, jet_terms, jet_terms, st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3))
@settings(max_examples=60)
def test_niljet_associative(ta, tb, tc, x, y, z):
    a, b, c = build(ta, x), build(tb, y), build(tc, z)
    assert (a * b) * c == a * (b * c)


@given(jet_terms, st.integers(1, 4))
@settings(max_examples=60)
def test_niljet_inverse(terms, body):
    a = build(terms, body)
    assert a * a.inverse() == NilJet.scalar(mpq(1))


def test_graded_generators_anticommute():
    grading = (0, 1)
    odd1 = NilJet.generator(0, 0, 1, grading)
    odd2 = NilJet.generator(1, 1, 0, grading)
    assert odd1 * odd2 == -(odd2 * odd1)


# -- truncated series --------------------------------------------------------

def test_series_from_factors_is_geometric():
    s = TruncSeries.from_factors(0, [], [mpq(2)], (4,))
    assert [s.coefficient((n,)) for n in range(5)] == [PolyU.const(2 ** n) for n in range(5)]
    g = TruncSeries.geometric(0, mpq(2), 0, mpq(1), (4,))
    assert g == s
    prod = s * TruncSeries.from_factors(0, [mpq(2)], [], (4,))
    assert prod == TruncSeries.const(1, (4,))
