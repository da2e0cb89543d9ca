"""Graduated non-convexity solver for quantized matrix completion.

The objective for a fixed smoothing width ``delta`` is::

    smoothed_rank(X) + lam * huber_sum(X)

An outer loop anneals ``delta`` geometrically (``delta <- alpha * delta``),
and each problem is solved by fixed-step gradient descent warm-started at
the previous solution.  The very first iterate is the exact minimizer of the
large-``delta`` surrogate ``||X||_F**2 / (2 delta**2) + lam * huber_sum(X)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import DomainError, StepSizeError
from .huber import huber_gradient, huber_sum
from .quantization import ObservedMatrix, as_matrix
from .srf import srf_value, srf_value_and_gradient

logger = logging.getLogger(__name__)

DIVERGENCE_PATIENCE = 10


@dataclass(frozen=True)
class SolverConfig:
    step_size: float = 1.0
    decay_factor: float = 0.8
    regularization: float = 0.02
    delta_init_constant: float = 2.0
    inner_tolerance: float = 1e-5
    outer_tolerance: float = 1e-4
    max_inner_iterations: int = 500
    max_outer_iterations: int = 60
    backtracking: bool = False
    stop_at_step_limit: bool = True

    def __post_init__(self):
        if not self.step_size > 0:
            raise DomainError(f"step_size must be positive, got {self.step_size}")
        if not 0 < self.decay_factor < 1:
            raise DomainError(f"decay_factor must lie in (0, 1), got {self.decay_factor}")
        if not self.regularization > 0:
            raise DomainError(f"regularization must be positive, got {self.regularization}")
        if not self.delta_init_constant > 0:
            raise DomainError("delta_init_constant must be positive")
        if not (self.inner_tolerance > 0 and self.outer_tolerance > 0):
            raise DomainError("tolerances must be positive")
        if self.max_inner_iterations < 1 or self.max_outer_iterations < 1:
            raise DomainError("iteration caps must be at least 1")


@dataclass
class SolveReport:
    recovered: np.ndarray
    delta_trace: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    inner_iteration_counts: list = field(default_factory=list)
    inner_converged: list = field(default_factory=list)
    outer_iterations: int = 0
    converged: bool = False
    stop_reason: str = "max_outer"


class InnerResult(NamedTuple):
    x: np.ndarray
    objectives: list
    iterations: int
    converged: bool
    step_size: float


def _check_params(delta, lam):
    if not (delta > 0 and np.isfinite(delta)):
        raise DomainError(f"delta must be positive and finite, got {delta!r}")
    if not lam >= 0:
        raise DomainError(f"lambda must be nonnegative, got {lam!r}")


def objective(X, obs: ObservedMatrix, delta: float, lam: float) -> float:
    """Smoothed rank plus ``lam`` times the translated Huber sum."""
    _check_params(delta, lam)
    X = as_matrix(X)
    obs.check_shape(X)
    return srf_value(X, delta) + lam * huber_sum(X, obs)


def objective_and_gradient(X, obs: ObservedMatrix, delta: float, lam: float):
    _check_params(delta, lam)
    X = as_matrix(X)
    obs.check_shape(X)
    srf, dF = srf_value_and_gradient(X, delta)
    value = srf + lam * huber_sum(X, obs)
    grad = lam * huber_gradient(X, obs) - dF
    return value, grad


def objective_gradient(X, obs: ObservedMatrix, delta: float, lam: float) -> np.ndarray:
    return objective_and_gradient(X, obs, delta, lam)[1]


def warm_start_values(centers, gap, delta, lam):
    """Per-entry minimizer of ``x**2/(2 delta**2) + lam * huber(x)``.

    The scalar objective is strictly convex and piecewise smooth, so exactly
    one of the three branch stationary points is admissible; if none is, the
    minimum sits on a branch boundary.
    """
    m = np.asarray(centers, dtype=np.float64)
    d2 = delta * delta
    t = 2.0 * lam * d2
    half = 0.5 * gap

    x_quad = m * t / (1.0 + t)
    x_hi = np.full_like(m, -lam * gap * d2)  # stationary point on x - m > g/2
    x_lo = np.full_like(m, lam * gap * d2)   # stationary point on x - m < -g/2

    out = np.where(m > 0, m - half, m + half)
    out = np.where(x_lo < m - half, x_lo, out)
    out = np.where(x_hi > m + half, x_hi, out)
    out = np.where(np.abs(x_quad - m) <= half, x_quad, out)
    return out


def init_warm_start(obs: ObservedMatrix, delta: float, lam: float) -> np.ndarray:
    """Exact minimizer of ``||X||_F**2/(2 delta**2) + lam * huber_sum(X)``."""
    if not (delta > 0 and lam > 0):
        raise DomainError("init_warm_start needs delta > 0 and lambda > 0")
    Z = np.zeros(obs.shape)
    if len(obs):
        Z[obs.i, obs.j] = warm_start_values(obs.centers, obs.gap, delta, lam)
    return Z


def _relative_change(new, old):
    return np.linalg.norm(new - old) / max(np.linalg.norm(old), 1.0)


def inner_gd(X0, obs: ObservedMatrix, delta: float, config: SolverConfig) -> InnerResult:
    """Fixed-step gradient descent on the objective at one ``delta``.

    Stops when the relative Frobenius change of an update drops below
    ``config.inner_tolerance`` or after ``config.max_inner_iterations``
    updates.  Raises :class:`StepSizeError` once the objective has risen on
    ``DIVERGENCE_PATIENCE`` consecutive updates.
    """
    lam = config.regularization
    mu = config.step_size
    X = as_matrix(X0).copy()
    obs.check_shape(X)

    value, grad = objective_and_gradient(X, obs, delta, lam)
    objectives = [value]
    rising = 0
    converged = False
    it = 0
    while it < config.max_inner_iterations:
        X_new = X - mu * grad
        new_value, new_grad = objective_and_gradient(X_new, obs, delta, lam)
        if config.backtracking:
            while new_value > value and mu > 1e-12 * config.step_size:
                mu *= 0.5
                X_new = X - mu * grad
                new_value, new_grad = objective_and_gradient(X_new, obs, delta, lam)
        it += 1
        if not np.isfinite(new_value):
            raise StepSizeError(config.step_size)
        rising = rising + 1 if new_value > value else 0
        if rising >= DIVERGENCE_PATIENCE:
            raise StepSizeError(config.step_size)
        change = _relative_change(X_new, X)
        X, value, grad = X_new, new_value, new_grad
        objectives.append(value)
        if change < config.inner_tolerance:
            converged = True
            break
    return InnerResult(X, objectives, it, converged, mu)


def step_is_stable(step_size, delta, lam):
    """Whether a fixed step ``step_size`` is below ``2 / L`` for the objective
    at ``delta``, with ``L = 2 lam + 1/delta**2`` bounding its curvature."""
    return step_size * (2.0 * lam + 1.0 / (delta * delta)) < 2.0


def _spectral_norm(X):
    return float(np.linalg.norm(X, 2)) if X.size else 0.0


def initial_delta(obs: ObservedMatrix, constant: float) -> float:
    """``constant`` times the spectral norm of the zero-filled observations."""
    s = _spectral_norm(obs.zero_filled())
    if s == 0:
        # all observed centers are zero; any positive scale gives Z = 0
        s = obs.gap
    return constant * s


def solve(obs: ObservedMatrix, config: SolverConfig | None = None) -> SolveReport:
    """Recover a low-rank real matrix from quantized partial observations."""
    config = config or SolverConfig()
    if len(obs) == 0:
        raise DomainError("cannot solve with an empty observation set")
    delta = initial_delta(obs, config.delta_init_constant)
    Z = init_warm_start(obs, delta, config.regularization)
    report = SolveReport(recovered=Z)
    run_config = config
    for k in range(config.max_outer_iterations):
        res = inner_gd(Z, obs, delta, run_config)
        if run_config.backtracking and res.step_size != run_config.step_size:
            # keep the reduced step for the steeper problems that follow
            run_config = replace(run_config, step_size=res.step_size)
        report.delta_trace.append(delta)
        report.objective_trace.append(res.objectives)
        report.inner_iteration_counts.append(res.iterations)
        report.inner_converged.append(res.converged)
        change = _relative_change(res.x, Z)
        Z = res.x
        report.outer_iterations = k + 1
        logger.debug("outer %d: delta=%.4g inner=%d change=%.3g obj=%.6g",
                     k + 1, delta, res.iterations, change, res.objectives[-1])
        # while delta exceeds every singular value the problem is the convex
        # large-delta surrogate and consecutive solutions barely move
        if change < config.outer_tolerance and delta < _spectral_norm(Z):
            report.converged = True
            report.stop_reason = "converged"
            break
        delta *= config.decay_factor
        if config.stop_at_step_limit and not step_is_stable(
                run_config.step_size, delta, config.regularization):
            report.stop_reason = "step_limit"
            break
    report.recovered = Z
    return report

