import random

import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from bethe_forge.errors import BadSite, ConfigError, DimMismatch, ExactDivisionFailed
from bethe_forge.exactmath import PolyU
from bethe_forge.hilbert import (NestingPath, TensorOperator, Twist, complement, koszul_sign,
                                 lex_index, lex_tuple, op_comm, op_divide, op_mul, perm_op,
                                 subset_label, subset_mask, weight_sectors)

U = PolyU.var()


def random_op(rng, q, N, deg=1):
    def f(r, c):
        return PolyU([rng.randint(-3, 3) for _ in range(deg + 1)])
    return TensorOperator.from_function(q, N, f)


# -- twist ------------------------------------------------------------------

def test_twist_invariants():
    tw = Twist.make((2, 3), (0,), y=(5,))
    assert (tw.K, tw.M, tw.n, tw.N) == (2, 1, 3, 1)
    assert tw.grading == (0, 0, 1)
    assert tw.parity(3) == 1 and tw.xi_of(3) == 5
    with pytest.raises(ConfigError, match="pairwise distinct"):
        Twist.make((2, 2), (0,))
    with pytest.raises(ConfigError):
        Twist.make((0, 2), (0,))
    with pytest.raises(ConfigError):
        Twist.make((1, 2), ())


def test_index_set_helpers():
    tw = Twist.make((2, 3, 5), (0,))
    assert complement((2,), tw) == (1, 3)
    assert subset_label(()) == "∅" and subset_label((1, 3)) == "13"
    assert subset_mask((1, 3)) == 0b101


def test_nesting_path_parsing():
    tw = Twist.make((2, 3), (0,))
    p = NestingPath.parse("12>1>", tw)
    assert p.order == (1, 2)
    assert p.subsets() == [(), (1,), (1, 2)]
    assert str(p) == "12>1>"
    assert NestingPath.parse("2,23,123,1234").order == (2, 3, 1, 4)
    with pytest.raises(ValueError):
        NestingPath.parse("12>>")
    with pytest.raises(ValueError):
        NestingPath.parse("1>", tw)


# -- weight sectors -----------------------------------------------------------

def test_weight_sector_examples():
    assert weight_sectors(2, 2) == [[(1, 1)], [(1, 2), (2, 1)], [(2, 2)]]
    assert weight_sectors(3, 1) == [[(1,)], [(2,)], [(3,)]]


@given(st.integers(1, 4), st.integers(1, 3))
def test_sectors_partition_the_basis(q, N):
    secs = weight_sectors(q, N)
    flat = [t for s in secs for t in s]
    assert len(flat) == q ** N == len(set(flat))
    for s in secs:
        assert len({tuple(sorted(t)) for t in s}) == 1


@given(st.integers(0, 80))
def test_lex_roundtrip(i):
    t = lex_tuple(i, 3, 4)
    assert lex_index(t, 3) == i


def test_from_dense_rejects_sector_mixing():
    dense = [[PolyU() for _ in range(4)] for _ in range(4)]
    dense[0][1] = PolyU.const(1)
    with pytest.raises(ValueError, match="weight sector"):
        TensorOperator.from_dense(2, 2, dense)
    with pytest.raises(DimMismatch):
        TensorOperator.from_dense(2, 2, dense[:3])


# -- permutations -------------------------------------------------------------

def test_perm_swaps_bosons():
    P = perm_op(1, 2, 2, 2)
    # P|e_{1,2}> = |e_{2,1}>
    assert P.entry((1, 0), (0, 1)) == PolyU.const(1)
    assert P.entry((0, 1), (0, 1)).is_zero()
    assert P * P == TensorOperator.identity(2, 2)


def test_perm_two_fermions_sign():
    P = perm_op(1, 2, 2, 2, grading=(0, 1))
    assert P.entry((1, 1), (1, 1)) == PolyU.const(-1)
    assert P.entry((0, 0), (0, 0)) == PolyU.const(1)
    assert P * P == TensorOperator.identity(2, 2)


def test_perm_graded_involution_three_sites():
    for i, j in ((1, 2), (1, 3), (2, 3)):
        P = perm_op(i, j, 3, 3, grading=(0, 1, 1))
        assert P * P == TensorOperator.identity(3, 3)


def test_perm_bad_sites():
    with pytest.raises(BadSite):
        perm_op(1, 3, 2, 2)
    with pytest.raises(BadSite):
        perm_op(2, 2, 2, 2)


def test_koszul_sign_of_transposition():
    assert koszul_sign((1, 1), (0, 1), (1, 0)) == -1
    assert koszul_sign((0, 1), (0, 1), (1, 0)) == 1


def test_graded_perm_matches_sign_formula():
    """P = Σ (-1)^{p_b} e_{ab} ⊗ e_{ba}, built entry by entry."""
    grading = (0, 1)
    P = perm_op(1, 2, 2, 2, grading=grading)
    for a in range(2):
        for b in range(2):
            want = -1 if grading[a] * grading[b] else 1
            assert P.entry((b, a), (a, b)) == PolyU.const(want)


# -- algebra ------------------------------------------------------------------

def test_operator_algebra_examples():
    rng = random.Random(1)
    a = random_op(rng, 2, 2)
    one = TensorOperator.identity(2, 2)
    assert op_mul(a, one) == a
    assert op_comm(a, a).is_zero()
    d1 = TensorOperator.scalar(U + 1, 2, 2)
    d2 = TensorOperator.from_entries(2, 2, {((0, 1), (0, 1)): U, ((1, 1), (1, 1)): U * U})
    assert op_comm(d1, d2).is_zero()
    with pytest.raises(DimMismatch):
        a * TensorOperator.identity(3, 2)


@pytest.mark.parametrize("seed", range(5))
def test_op_mul_associative(seed):
    rng = random.Random(seed)
    a, b, c = (random_op(rng, 2, 3) for _ in range(3))
    assert (a * b) * c == a * (b * c)


def test_op_mul_matches_dense_product():
    rng = random.Random(11)
    a, b = random_op(rng, 3, 2), random_op(rng, 3, 2)
    x = mpq(2, 7)
    got = (a * b).evaluate_dense(x)
    want = a.evaluate_dense(x).dot(b.evaluate_dense(x))
    assert (got == want).all()


def test_shift_and_call():
    a = TensorOperator.scalar(U * U, 2, 1)
    assert a.shift(2) == TensorOperator.scalar((U + 2) * (U + 2), 2, 1)
    assert a(2) == a.shift(2)


def test_op_divide():
    rng = random.Random(5)
    a = random_op(rng, 2, 2)
    d = TensorOperator.scalar(U - 3, 2, 2)
    assert op_divide(a * d, d) == a
    with pytest.raises(ExactDivisionFailed):
        op_divide(a * d + TensorOperator.identity(2, 2), d)


def test_json_roundtrip():
    rng = random.Random(7)
    a = random_op(rng, 2, 2, deg=2)
    doc = a.to_json()
    assert doc["basis"] == "lex" and doc["dim"] == 4
    assert TensorOperator.from_json(doc, 2, 2) == a
    with pytest.raises(DimMismatch):
        TensorOperator.from_json(doc, 3, 2)
