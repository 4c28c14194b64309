import random
from itertools import combinations, permutations

import numpy as np
import pytest
from gmpy2 import mpq

from bethe_forge.bethe import (QFunction, _bae_residual, _bae_terms, _remainder, _trim,
                               check_bae, check_degree_law, check_op_divisibility,
                               check_t1_closure, default_family, diagonalize_family,
                               divisibility_combination, expected_degree, q_function,
                               q_functions, t1_from_qfunctions)
from bethe_forge.errors import DegenerateSpectrum, LeadingCoeffUnderflow
from bethe_forge.exactmath import PolyU
from bethe_forge.hilbert import NestingPath, TensorOperator, Twist
from bethe_forge.nesting import q_operator

from conftest import draw_twist


def basis_for(tw, order=None, seed=0):
    path = NestingPath.from_order(order or tw.full_set())
    return path, diagonalize_family(tw, default_family(tw, path), seed=seed)


def subsets(tw):
    full = tw.full_set()
    return [S for r in range(len(full) + 1) for S in combinations(full, r)]


@pytest.fixture(scope="module")
def one_site():
    tw = Twist.make((2, 3), (0,))
    return (tw,) + basis_for(tw)


# -- diagonalization ----------------------------------------------------------------

def test_one_site_basis_is_standard(one_site):
    tw, _, basis = one_site
    assert len(basis.states) == 2
    for sb in basis.sectors:
        assert sb.vecs.shape == (1, 1)


def test_two_site_mixed_sector():
    tw = Twist.make((2, 3), (0, mpq(1, 2)))
    path, basis = basis_for(tw)
    sb = next(s for s in basis.sectors if s.key == (1, 1))
    assert sb.states == ((1, 2), (2, 1))
    for op in default_family(tw, path):
        blk = op.blocks[(1, 1)].evaluate(0.37)
        d = sb.inv @ blk @ sb.vecs
        assert abs(d[0, 1]) < 1e-9 and abs(d[1, 0]) < 1e-9


def test_identity_family_is_accepted():
    tw = Twist.make((2, 3), (0, mpq(1, 2)))
    basis = diagonalize_family(tw, [TensorOperator.identity(2, 2)])
    assert len(basis.states) == 4


def test_defective_family_is_rejected():
    tw = Twist.make((2, 3), (0, mpq(1, 2)))
    jordan = TensorOperator.from_entries(2, 2, {((0, 1), (1, 0)): PolyU.const(1)})
    with pytest.raises(DegenerateSpectrum):
        diagonalize_family(tw, [jordan])


def test_seeded_basis_is_reproducible():
    tw = draw_twist(random.Random(2), 2, 3)
    _, a = basis_for(tw, seed=4)
    _, b = basis_for(tw, seed=4)
    for sa, sb in zip(a.sectors, b.sectors):
        assert np.array_equal(sa.vecs, sb.vecs)


# -- Q-functions -----------------------------------------------------------------------

def test_full_set_q_function():
    tw = Twist.make((2, 3), (mpq(1, 3), mpq(-1, 2)))
    _, basis = basis_for(tw)
    want = np.array([1 / 3 * -1 / 2 * 1.0, -(1 / 3 - 1 / 2), 1.0])
    for f in q_functions((1, 2), tw, basis):
        assert np.allclose(f.coeffs, want, atol=1e-12)
        assert np.allclose(sorted(f.roots.real), [-0.5, 1 / 3])


def test_one_spin_q_functions(one_site):
    tw, _, basis = one_site
    f0, f1 = q_functions((1,), tw, basis)
    assert np.allclose(f0.coeffs, [6, 1]) and np.allclose(f0.roots, [-6])
    assert f1.degree == 0 and np.allclose(f1.coeffs, [6])
    assert f0(1.5) == pytest.approx(7.5)


def test_strict_trim_raises():
    with pytest.raises(LeadingCoeffUnderflow):
        _trim(np.array([1.0, 2.0, 1e-15]), 1e-9, strict=True)
    assert len(_trim(np.array([1.0, 2.0, 1e-15]), 1e-9, strict=False)) == 2


def test_q_function_json(one_site):
    tw, _, basis = one_site
    doc = q_function((1,), tw, basis, 0).to_json()
    assert doc["degree"] == 1 and doc["roots"] == [[-6.0, 0.0]]


def test_float_eigenvalue_matches_exact_operator():
    """Apply the exact operator at a rational point to the float eigenvector."""
    tw = draw_twist(random.Random(3), 2, 3)
    _, basis = basis_for(tw)
    x = mpq(5, 7)
    for I in subsets(tw):
        dense = np.array(q_operator(I, tw).evaluate_dense(x), dtype=float)
        for s in range(len(basis.states)):
            si, col = basis.states[s]
            sb = basis.sectors[si]
            vec = np.zeros(tw.n ** tw.N, dtype=complex)
            for k, t in enumerate(sb.states):
                idx = 0
                for a in t:
                    idx = idx * tw.n + (a - 1)
                vec[idx] = sb.vecs[k, col]
            lam = q_function(I, tw, basis, s)(float(x))
            assert np.allclose(dense @ vec, lam * vec, rtol=1e-8, atol=1e-8 * max(1, abs(lam)))


# -- degree law ----------------------------------------------------------------------------

def test_expected_degree():
    assert expected_degree((1,), (2, 1)) == 2
    assert expected_degree((), (2, 1)) == 0


@pytest.mark.parametrize("K,M,N", [(2, 0, 1), (2, 0, 2), (2, 0, 3), (3, 0, 2), (1, 1, 2), (2, 1, 2)])
def test_degree_law(K, M, N):
    tw = draw_twist(random.Random(K + M + N), K, N, M=M)
    _, basis = basis_for(tw)
    assert check_degree_law(tw, basis, subsets(tw))["passed"]


# -- Bethe equations -------------------------------------------------------------------------

def test_one_magnon_bae(one_site):
    tw, path, basis = one_site
    rep = check_bae(path, tw, basis)
    assert rep["passed"] and rep["max_residual"] < 1e-9
    zero_magnon = rep["states"][1]
    assert zero_magnon["levels"][0]["residuals"] == []


@pytest.mark.parametrize("K,M,N", [(2, 0, 2), (2, 0, 3), (3, 0, 2), (1, 1, 1), (1, 1, 2), (2, 1, 2)])
def test_bae_on_every_path(K, M, N):
    tw = draw_twist(random.Random(50 + K + M + N), K, N, M=M)
    for order in permutations(tw.full_set()):
        path, basis = basis_for(tw, order)
        rep = check_bae(path, tw, basis)
        assert rep["passed"], rep["max_residual"]
        assert not any(s["flagged"] for s in rep["states"])


def test_bae_negative_control():
    """Swapping the twist eigenvalues makes the equations fail."""
    tw = Twist.make((2, 3), (0, mpq(1, 2)))
    path, basis = basis_for(tw)
    worst = 0.0
    for s in range(len(basis.states)):
        fq = [q_function(S, tw, basis, s) for S in path.subsets()]
        for r in fq[1].roots:
            val, _ = _bae_residual(*_bae_terms("bb", 3.0, 2.0, *fq, r))
            worst = max(worst, val)
    assert worst > 1e-3


def test_singular_root_uses_cleared_form():
    """A Bethe root sitting on θ_1 with a partner at θ_1 - 2 makes the ratio 0/0."""
    tw = Twist.make((mpq(2, 3), mpq(5, 3)), (mpq(-4, 3), -2, 5))
    path, basis = basis_for(tw, (1, 2))
    rep = check_bae(path, tw, basis)
    assert rep["passed"] and rep["max_residual"] < 1e-9
    singular = [lv for st in rep["states"] for lv in st["levels"] if "singular" in lv]
    assert singular and all(not st["flagged"] for st in rep["states"])
    assert _bae_residual(0.0, 0.0, -1.0) == (0.0, True)
    assert _bae_residual(1e-3, 1e-12, -1.0)[0] > 1e-9


def test_op_divisibility_examples(one_site):
    tw, _, basis = one_site
    assert check_op_divisibility((), 1, 2, tw, basis)["passed"]
    assert check_op_divisibility((), 2, 1, tw, basis)["passed"]


@pytest.mark.parametrize("K,M,N", [(2, 0, 2), (3, 0, 2), (1, 1, 1), (1, 1, 2), (2, 1, 2)])
def test_op_divisibility_all(K, M, N):
    tw = draw_twist(random.Random(60 + K + M + N), K, N, M=M)
    _, basis = basis_for(tw)
    for I in subsets(tw):
        out = [j for j in tw.full_set() if j not in I]
        for i in out:
            for j in out:
                if i != j:
                    rep = check_op_divisibility(I, i, j, tw, basis)
                    assert rep["passed"], (I, i, j, rep["max_remainder"])


def test_constant_divisor_has_no_remainder():
    assert np.all(_remainder(np.array([1.0, 2.0, 3.0]), np.array([5.0])) == 0)


def test_divisibility_combination_control():
    """A generic polynomial is not divisible: the remainder check has teeth."""
    c = divisibility_combination("bb", 2.0, 3.0, np.array([1.0]), np.array([1.0, 1.0]),
                                 np.array([2.0, 1.0]), np.array([0.0, 1.0, 1.0]))
    assert np.max(np.abs(_remainder(c, np.array([1.0, 1.0])))) > 1e-3


# -- closure -----------------------------------------------------------------------------------

@pytest.mark.parametrize("K,M,N", [(2, 0, 1), (2, 0, 2), (2, 0, 3), (1, 1, 1), (1, 1, 2)])
def test_t1_closure(K, M, N):
    tw = draw_twist(random.Random(70 + K + M + N), K, N, M=M)
    for order in permutations(tw.full_set()):
        path, basis = basis_for(tw, order)
        rep = check_t1_closure(path, tw, basis)
        assert rep["passed"], rep["max_error"]


def test_t1_rebuild_is_path_independent():
    tw = Twist.make((2, 3), (0, mpq(1, 2)))
    p1, basis = basis_for(tw, (1, 2))
    p2 = NestingPath.from_order((2, 1))
    for s in range(len(basis.states)):
        assert t1_from_qfunctions(p1, tw, basis, s, 0.7) == pytest.approx(
            t1_from_qfunctions(p2, tw, basis, s, 0.7))


def test_qfunction_dataclass():
    f = QFunction((1,), 0, np.array([2.0, 1.0]), np.array([-2.0]))
    assert f.degree == 1 and f.leading == 1 and f(1.0) == 3.0
