import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmchuber.errors import DimensionError, DomainError
from qmchuber.huber import (HuberParams, huber_derivative, huber_gradient, huber_sum,
                            huber_translated)
from qmchuber.quantization import ObservedMatrix

from conftest import random_observed


def scalar_huber(x, m, g):
    r = abs(x - m)
    if r <= g / 2:
        return r * r - g * g / 4
    return g * (r - g / 4) - g * g / 4


@pytest.mark.parametrize("x,expected", [(3.0, -0.25), (3.5, 0.0), (4.5, 1.0)])
def test_value_examples(x, expected):
    assert huber_translated(x, 3.0, 1.0) == pytest.approx(expected, abs=1e-15)
    assert HuberParams(1.0, 3.0).value(x) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("x,expected", [(3.0, 0.0), (5.0, 1.0), (3.5, 1.0), (1.0, -1.0)])
def test_derivative_examples(x, expected):
    assert huber_derivative(x, 3.0, 1.0) == expected


def test_nonfinite_rejected():
    with pytest.raises(DomainError):
        huber_translated(np.nan, 0.0, 1.0)
    with pytest.raises(DomainError):
        huber_derivative(np.inf, 0.0, 1.0)
    with pytest.raises(DomainError):
        HuberParams(0.0, 1.0)


@pytest.mark.parametrize("g", [0.3, 1.0, 2.0])
@pytest.mark.parametrize("side", [-1, 1])
def test_branches_agree_at_boundary(g, side):
    m = 1.7
    b = m + side * g / 2
    eps = 1e-9
    assert abs(huber_translated(b - eps, m, g) - huber_translated(b + eps, m, g)) < 1e-8
    quad = (b - m) ** 2 - g * g / 4
    lin = g * (abs(b - m) - g / 4) - g * g / 4
    assert abs(quad - lin) <= 1e-12
    assert abs(huber_derivative(b, m, g) - side * g) <= 1e-12
    assert abs(2 * (b - m) - side * g) <= 1e-12


@given(st.floats(-10, 10), st.floats(0.1, 3.0), st.floats(-5, 5))
def test_sign_contract(x, g, m):
    v = huber_translated(x, m, g)
    r = abs(x - m)
    if r < g / 2:
        assert v < 0
    elif r > g / 2:
        assert v > 0


@given(st.lists(st.floats(-6, 6), min_size=3, max_size=3, unique=True), st.floats(0.1, 3))
def test_scalar_convexity(xs, g):
    x1, x2, x3 = sorted(xs)
    t = (x2 - x1) / (x3 - x1)
    f = lambda x: huber_translated(x, 0.4, g)
    assert f(x2) <= (1 - t) * f(x1) + t * f(x3) + 1e-12


def test_sign_contract_zero_at_bounds():
    for m, g in ((3.0, 1.0), (0.0, 2.0), (-1.5, 0.5)):
        assert huber_translated(m + g / 2, m, g) == 0.0
        assert huber_translated(m - g / 2, m, g) == 0.0


def test_huber_sum_examples(ratings_scheme):
    rng = np.random.default_rng(5)
    obs = random_observed(rng, (4, 4), ratings_scheme, 10)
    X = obs.zero_filled()
    assert huber_sum(X, obs) == pytest.approx(-2.5, abs=1e-12)
    X[obs.i, obs.j] += np.where(rng.random(10) < 0.5, -0.5, 0.5)
    assert huber_sum(X, obs) == pytest.approx(0.0, abs=1e-12)


def test_huber_sum_scalar_loop_oracle(ratings_scheme):
    rng = np.random.default_rng(11)
    obs = random_observed(rng, (4, 4), ratings_scheme, 6)
    X = rng.uniform(0, 6, size=(4, 4))
    expected = 0.0
    for i, j, k in obs.observations:
        expected += scalar_huber(X[i, j], ratings_scheme.level_values[k], 1.0)
    assert huber_sum(X, obs) == pytest.approx(expected, abs=1e-12)


def test_huber_gradient_examples(ratings_scheme):
    rng = np.random.default_rng(2)
    obs = random_observed(rng, (5, 4), ratings_scheme, 8)
    X = obs.zero_filled()
    assert np.all(huber_gradient(X, obs) == 0)
    i, j = obs.i[3], obs.j[3]
    X[i, j] += 1.0
    G = huber_gradient(X, obs)
    assert G[i, j] == 1.0 and np.count_nonzero(G) == 1


def test_huber_gradient_matches_finite_differences(ratings_scheme):
    rng = np.random.default_rng(8)
    obs = random_observed(rng, (6, 5), ratings_scheme, 20)
    X = rng.uniform(0, 6, size=(6, 5))
    h = 1e-5 * obs.gap
    fd = np.zeros_like(X)
    for i in range(6):
        for j in range(5):
            E = np.zeros_like(X)
            E[i, j] = h
            fd[i, j] = (huber_sum(X + E, obs) - huber_sum(X - E, obs)) / (2 * h)
    G = huber_gradient(X, obs)
    assert np.linalg.norm(G - fd) <= 1e-6 * np.linalg.norm(fd)
    assert np.all(G[~obs.mask()] == 0)


def test_shape_mismatch(ratings_scheme):
    obs = ObservedMatrix(2, 2, [0], [0], [1], ratings_scheme)
    with pytest.raises(DimensionError):
        huber_sum(np.zeros((3, 2)), obs)
    with pytest.raises(DimensionError):
        huber_gradient(np.zeros((2, 3)), obs)
