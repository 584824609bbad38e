import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fxtdo_mpc.qp import LOWER, UPPER, QPError, kkt_residual, qp_solve
from oracles import projected_gradient


def random_qp(rng, n):
    M = rng.normal(size=(n, n))
    H = M @ M.T / n + np.eye(n)
    g = rng.normal(scale=3.0, size=n)
    lb = rng.uniform(-2.0, 0.0, n)
    ub = lb + rng.uniform(0.1, 3.0, n)
    # some unbounded coordinates
    lb[rng.random(n) < 0.15] = -np.inf
    ub[rng.random(n) < 0.15] = np.inf
    return H, g, lb, ub


def test_unconstrained():
    res = qp_solve(np.eye(2), [-1.0, -1.0], None, None)
    np.testing.assert_allclose(res.z, [1.0, 1.0], rtol=1e-15)
    assert res.status == "optimal"


def test_upper_bounds_active():
    res = qp_solve(np.eye(2), [-1.0, -1.0], [-np.inf, -np.inf], [0.5, 0.5])
    np.testing.assert_allclose(res.z, [0.5, 0.5])
    np.testing.assert_array_equal(res.active, [UPPER, UPPER])
    np.testing.assert_allclose(res.dual, [-0.5, -0.5])


def test_lower_bound_multiplier_sign():
    res = qp_solve(np.eye(1), [1.0], [0.0], [5.0])
    assert res.z[0] == 0.0
    assert res.active[0] == LOWER
    assert res.dual[0] == pytest.approx(1.0)


def test_not_positive_definite():
    with pytest.raises(QPError):
        qp_solve(np.diag([1.0, -1.0]), [0.0, 0.0], None, None)


def test_infeasible_bounds():
    with pytest.raises(QPError):
        qp_solve(np.eye(2), [0.0, 0.0], [1.0, 0.0], [0.0, 1.0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        qp_solve(np.eye(2), [0.0, 0.0, 0.0], None, None)


def test_hundred_random_qps_match_projected_gradient():
    rng = np.random.default_rng(2024)
    worst_z, worst_kkt = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(2, 25))
        H, g, lb, ub = random_qp(rng, n)
        res = qp_solve(H, g, lb, ub)
        ref = projected_gradient(H, g, lb, ub, tol=1e-14)
        assert res.status == "optimal"
        worst_z = max(worst_z, np.abs(res.z - ref).max())
        worst_kkt = max(worst_kkt, res.kkt)
    assert worst_z < 1e-7
    assert worst_kkt < 1e-8


def test_warm_start_same_solution():
    rng = np.random.default_rng(7)
    H, g, lb, ub = random_qp(rng, 12)
    cold = qp_solve(H, g, lb, ub)
    warm = qp_solve(H, g, lb, ub, warm_active=cold.active)
    np.testing.assert_allclose(warm.z, cold.z, atol=1e-12)
    assert warm.iterations <= 2


def test_wrong_warm_start_recovers():
    rng = np.random.default_rng(8)
    H, g, lb, ub = random_qp(rng, 12)
    cold = qp_solve(H, g, lb, ub)
    flipped = -cold.active
    warm = qp_solve(H, g, lb, ub, warm_active=flipped)
    np.testing.assert_allclose(warm.z, cold.z, atol=1e-10)


def test_kkt_residual_detects_wrong_point():
    H, g = np.eye(2), np.array([-1.0, -1.0])
    lb, ub = np.full(2, -np.inf), np.full(2, np.inf)
    assert kkt_residual(H, g, lb, ub, np.array([1.0, 1.0]), np.zeros(2)) == 0.0
    assert kkt_residual(H, g, lb, ub, np.array([0.0, 1.0]), np.zeros(2)) == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_solution_feasible_and_optimal(n, seed):
    H, g, lb, ub = random_qp(np.random.default_rng(seed), n)
    res = qp_solve(H, g, lb, ub)
    assert np.all(res.z >= lb) and np.all(res.z <= ub)
    assert res.kkt < 1e-8
    # no feasible coordinate move improves the objective
    grad = H @ res.z + g
    for i in range(n):
        if res.z[i] > lb[i] + 1e-9:
            assert grad[i] <= 1e-8
        if res.z[i] < ub[i] - 1e-9:
            assert grad[i] >= -1e-8
