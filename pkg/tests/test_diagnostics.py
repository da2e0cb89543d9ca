import numpy as np
import pytest

from qmchuber.diagnostics import (convexity_probe, finite_difference_hessian, lambda_window,
                                  suggest_delta)
from qmchuber.errors import AssumptionError, CapacityError, DomainError, SearchError
from qmchuber.quantization import ObservedMatrix
from qmchuber.solver import objective

PROBE_X = np.array([[3.2, 1.1], [0.7, 2.4]])  # singular values about 3.79 and 1.82


@pytest.fixture
def probe_obs(ratings_scheme):
    return ObservedMatrix.from_dense_levels(ratings_scheme.quantize_array(PROBE_X),
                                            np.ones((2, 2), bool), ratings_scheme)


def sv(X):
    return np.linalg.svd(X, compute_uv=False)


def test_lambda_window_worked_example():
    w = lambda_window(2, 10.0, 4, 1.0, 0.01)
    assert w.lower == pytest.approx(2 / 9.25, rel=1e-14)
    assert w.upper == pytest.approx(4 / 4.01, rel=1e-14)
    assert abs(w.lower - 0.21622) < 1e-5 and abs(w.upper - 0.99751) < 1e-5
    assert w.feasible


def test_lambda_window_infeasible():
    w = lambda_window(5, 2.0, 4, 1.0, 0.01)
    assert w.lower == pytest.approx(4.0) and not w.feasible


def test_lambda_window_assumption_boundary():
    with pytest.raises(AssumptionError, match="Assumption 2"):
        lambda_window(1, 3 * 1.0 / 4, 4, 1.0, 0.01)
    with pytest.raises(DomainError):
        lambda_window(1, 1.0, 4, 0.0, 0.01)


def test_hessian_of_quadratic_region(probe_obs):
    # at huge delta with entries in their quadratic Huber band the Hessian
    # is 2*lam*I plus the isotropic 1/delta**2 term
    X = probe_obs.zero_filled() + 0.1
    delta, lam = 1e4, 0.3
    H = finite_difference_hessian(X, probe_obs, delta, lam)
    np.testing.assert_allclose(H, (2 * lam + 1 / delta ** 2) * np.eye(4), atol=1e-6)


def test_hessian_matches_second_differences(probe_obs):
    X, delta, lam = PROBE_X, 2.0, 0.1
    H = finite_difference_hessian(X, probe_obs, delta, lam)
    h = 1e-4
    f = lambda Y: objective(Y, probe_obs, delta, lam)
    E = np.zeros(4)
    for k in range(4):
        E[:] = 0
        E[k] = h
        Ek = E.reshape(2, 2)
        second = (f(X + Ek) - 2 * f(X) + f(X - Ek)) / h ** 2
        assert H[k, k] == pytest.approx(second, abs=1e-4)


@pytest.mark.parametrize("lam", [0.0, 0.1, 5.0])
def test_probe_holds_at_large_delta(lam, probe_obs):
    r = convexity_probe(PROBE_X, probe_obs, 100 * sv(PROBE_X)[0], lam, 0.5, 32, 0)
    assert r.condition_holds and r.sample_points == 32
    assert r.max_asymmetry < 1e-5


def test_probe_fails_at_small_delta_without_huber(probe_obs):
    s = sv(PROBE_X)
    r = convexity_probe(PROBE_X, probe_obs, s[1] / 100, 0.0, s[0], 256, 0)
    assert not r.condition_holds
    assert r.min_eigenvalue_found < -1.0


def test_probe_degenerate_ball(probe_obs):
    s = sv(PROBE_X)
    r = convexity_probe(PROBE_X, probe_obs, s[1] / 100, 0.0, 0.0, 1, 0)
    assert r.sample_points == 1 and len(r.eigenvalues) == 1
    # far from rank-deficient points the small-delta surrogate is flat
    assert abs(r.min_eigenvalue_found) < 1e-6


def test_probe_skips_repeated_singular_values(ratings_scheme):
    obs = ObservedMatrix.from_dense_levels(np.full((2, 2), 2), np.ones((2, 2), bool),
                                           ratings_scheme)
    r = convexity_probe(3 * np.eye(2), obs, 1.0, 0.1, 0.0, 1, 0)
    assert r.skipped_samples == 1 and not r.condition_holds


def test_probe_capacity(ratings_scheme):
    obs = ObservedMatrix.from_triples(9, 8, [], ratings_scheme)
    with pytest.raises(CapacityError):
        convexity_probe(np.ones((9, 8)), obs, 1.0, 0.1, 0.1, 1, 0)


def test_probe_is_deterministic(probe_obs):
    a = convexity_probe(PROBE_X, probe_obs, 1.0, 0.05, 1.0, 8, 42)
    b = convexity_probe(PROBE_X, probe_obs, 1.0, 0.05, 1.0, 8, 42)
    assert a.eigenvalues == b.eigenvalues


def test_suggest_delta_decreases_with_lambda(probe_obs):
    deltas = [suggest_delta(PROBE_X, probe_obs, lam, 0.1, 16, 0).delta
              for lam in (0.01, 0.1, 1.0, 10.0)]
    assert all(b <= a for a, b in zip(deltas, deltas[1:]))
    assert deltas[-1] < deltas[0]


def test_suggest_delta_result_passes_probe(probe_obs):
    res = suggest_delta(PROBE_X, probe_obs, 0.1, 0.1, 16, 0)
    assert convexity_probe(PROBE_X, probe_obs, res.delta, 0.1, 0.1, 16, 0).condition_holds
    assert (res.delta, True) in res.trace


def test_suggest_delta_search_failure(probe_obs):
    # the PSD tolerance is absolute, so the instance is scaled down until the
    # surrogate curvature near delta = 1e3*sigma_max dwarfs it; a ball wide
    # enough to reach singular values of order delta then exposes concavity
    X = 1e-4 * PROBE_X
    with pytest.raises(SearchError):
        suggest_delta(X, probe_obs, 0.0, 3e3 * sv(X)[0], 64, 0)


def test_probe_monotone_along_trace(probe_obs):
    trace = suggest_delta(PROBE_X, probe_obs, 0.05, 0.5, 16, 1).trace
    passing = [d for d, ok in trace if ok]
    for d, ok in trace:
        if not ok:
            assert all(p > d for p in passing)


def test_lambda_window_monotone_sweeps():
    lowers = [lambda_window(2, d, 4, 1.0, 0.01).lower for d in (1, 2, 5, 10, 100)]
    uppers = [lambda_window(2, 1e3, n, 1.0, 0.01).upper for n in (1, 4, 16, 64)]
    assert all(b < a for a, b in zip(lowers, lowers[1:]))
    assert all(b < a for a, b in zip(uppers, uppers[1:]))
