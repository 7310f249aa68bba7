import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from adaptive_tracking.qp import solve_qp


def random_qp(rng, n, m):
    A = rng.normal(size=(n, n))
    P = A @ A.T + 0.1 * np.eye(n)
    q = rng.normal(size=n)
    G = rng.normal(size=(m, n))
    h = rng.uniform(0.1, 1.0, m)          # z = 0 is strictly feasible
    return P, q, G, h


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 8), m=st.integers(1, 12))
def test_matches_scipy_on_random_convex_qps(seed, n, m):
    P, q, G, h = random_qp(np.random.default_rng(seed), n, m)
    res = solve_qp(P, q, G, h)
    assert res.converged
    ref = minimize(lambda z: 0.5 * z @ P @ z + q @ z, np.zeros(n), jac=lambda z: P @ z + q,
                   constraints=[{"type": "ineq", "fun": lambda z: h - G @ z,
                                 "jac": lambda z: -G}],
                   method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
    f = lambda z: 0.5 * z @ P @ z + q @ z
    assert f(res.z) <= f(ref.x) + 1e-7
    assert np.all(G @ res.z <= h + 1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_kkt_conditions_hold(seed):
    P, q, G, h = random_qp(np.random.default_rng(seed), 5, 7)
    res = solve_qp(P, q, G, h, tol=1e-12)
    lam, z = res.multipliers, res.z
    assert np.all(lam >= -1e-12)
    np.testing.assert_allclose(P @ z + q + G.T @ lam, 0.0, atol=1e-8)
    assert np.max(np.abs(lam * (h - G @ z))) < 1e-8


def test_unconstrained_case():
    P = np.diag([2.0, 4.0])
    res = solve_qp(P, np.array([-2.0, -4.0]), np.zeros((0, 2)), np.zeros(0))
    np.testing.assert_allclose(res.z, [1.0, 1.0])


def test_active_bound():
    # min (z - 2)^2 subject to z <= 1
    res = solve_qp(np.array([[2.0]]), np.array([-4.0]), np.array([[1.0]]), np.array([1.0]))
    assert res.z[0] == pytest.approx(1.0, abs=1e-8)
    assert res.multipliers[0] == pytest.approx(2.0, abs=1e-6)
