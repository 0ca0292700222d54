import itertools
import math

import numpy as np
import pytest

from blockperm.covers import CoverConfig, bethe2_pair_sum, betheM_exhaustive, betheM_sampled, lift
from blockperm.errors import DimensionMismatch, TooLarge, ZeroPermanent
from blockperm.exactperm import all_permutations, cycle_count, permanent_naive, permanent_ryser


def pair_sum_reference(A):
    """Plain double loop over pairs of permutations."""
    n = A.shape[0]
    perms = list(itertools.permutations(range(n)))
    w = [math.prod(A[i, p[i]] for i in range(n)) for p in perms]
    total = 0.0
    for p1, w1 in zip(perms, w):
        for p2, w2 in zip(perms, w):
            inv2 = np.argsort(p2)
            tau = [p1[inv2[i]] for i in range(n)]
            total += w1 * w2 * 2.0 ** -cycle_count(tau)
    return math.sqrt(total)


def test_lift_identity_degree_one(rng):
    A = rng.random((3, 3))
    assert np.array_equal(lift(A, CoverConfig.identity(3, 1)), A)


def test_lift_single_cell():
    L = lift([[2.0]], CoverConfig.identity(1, 2))
    assert np.array_equal(L, 2.0 * np.eye(2))


def test_lift_all_swaps_squares_permanent(rng):
    A = rng.random((2, 2))
    swaps = np.tile([1, 0], (2, 2, 1))
    L = lift(A, CoverConfig(2, swaps))
    assert np.allclose(L[0:2, 0:2], A[0, 0] * np.array([[0, 1], [1, 0]]))
    assert math.isclose(permanent_naive(L).value, permanent_naive(A).value ** 2, rel_tol=1e-12)


def test_lift_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        lift(np.ones((3, 3)), CoverConfig.identity(2, 2))


def test_pair_sum_examples():
    assert math.isclose(bethe2_pair_sum([[2.5]]).value, 2.5)
    assert math.isclose(bethe2_pair_sum(np.ones((2, 2))).value, math.sqrt(3), rel_tol=1e-14)


def test_pair_sum_matches_reference(rng):
    for n in (2, 3, 4):
        A = rng.random((n, n))
        want = pair_sum_reference(A)
        assert math.isclose(bethe2_pair_sum(A).value, want, rel_tol=1e-12)
        assert math.isclose(bethe2_pair_sum(A, method="naive").value, want, rel_tol=1e-12)


def test_pair_sum_methods_agree_n6(rng):
    A = rng.random((6, 6))
    assert math.isclose(bethe2_pair_sum(A).log, bethe2_pair_sum(A, method="naive").log, rel_tol=1e-12)


def test_pair_sum_bounded_by_permanent(rng):
    for n in range(1, 7):
        A = rng.random((n, n))
        assert bethe2_pair_sum(A).log <= permanent_ryser(A).log + 1e-12


def test_pair_sum_depends_on_quotient_only():
    # reindexing: (s1, s2) -> (s1 r, s2 r) preserves s1 s2^-1
    P = all_permutations(4)
    r = np.array([2, 0, 3, 1])
    for a in P[::5]:
        for b in P[::7]:
            q1 = a[np.argsort(b)]
            q2 = a[r][np.argsort(b[r])]
            assert np.array_equal(q1, q2)


def test_pair_sum_equals_exhaustive(rng):
    for n in (1, 2, 3):
        A = rng.random((n, n))
        assert math.isclose(bethe2_pair_sum(A).log, betheM_exhaustive(A, 2).log, rel_tol=1e-9, abs_tol=1e-12)
    assert math.isclose(
        bethe2_pair_sum(np.ones((3, 3))).log, betheM_exhaustive(np.ones((3, 3)), 2).log, rel_tol=1e-12
    )


def test_pair_sum_errors():
    with pytest.raises(TooLarge):
        bethe2_pair_sum(np.ones((9, 9)))
    with pytest.raises(ZeroPermanent):
        bethe2_pair_sum(np.zeros((2, 2)))


def test_exhaustive_degree_one_is_permanent(rng):
    A = rng.random((4, 4))
    assert betheM_exhaustive(A, 1).log == permanent_ryser(A).log


def test_exhaustive_single_entry():
    assert math.isclose(betheM_exhaustive([[3.0]], 2).value, 3.0)


def test_exhaustive_cap():
    with pytest.raises(TooLarge):
        betheM_exhaustive(np.ones((5, 5)), 2)


def test_sampled_degree_one(rng):
    A = rng.random((3, 3))
    est, se = betheM_sampled(A, 1, 10, seed=0)
    assert est.log == permanent_ryser(A).log and se == 0.0


def test_sampled_close_to_exhaustive(rng):
    A = rng.random((3, 3))
    est, se = betheM_sampled(A, 2, 512 * 4, seed=5)
    exact = betheM_exhaustive(A, 2)
    assert abs(est.log - exact.log) <= 3 * se


def test_sampled_reproducible(rng):
    A = rng.random((3, 3))
    assert betheM_sampled(A, 2, 1, seed=9) == betheM_sampled(A, 2, 1, seed=9)
    a, _ = betheM_sampled(A, 3, 20, seed=1)
    b, _ = betheM_sampled(A, 3, 20, seed=1)
    assert a.log == b.log


def test_sampled_size_limit():
    with pytest.raises(TooLarge):
        betheM_sampled(np.ones((9, 9)), 3, 1, seed=0)
