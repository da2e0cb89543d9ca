"""Numerical companions to the theory: the lambda window and a local
convexity probe for the smoothed objective.

The probe builds the full ``(mn) x (mn)`` Hessian of the objective by central
differences of the analytic gradient, so it is restricted to tiny matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, CapacityError, DomainError, SearchError
from .quantization import ObservedMatrix, as_matrix
from .solver import objective_gradient

MAX_PROBE_ENTRIES = 64
PSD_TOLERANCE = 1e-6
REPEATED_SV_TOLERANCE = 1e-6


@dataclass(frozen=True)
class LambdaWindow:
    lower: float
    upper: float
    feasible: bool


def lambda_window(r_star, delta_gap, omega_size, g, epsilon) -> LambdaWindow:
    """Interval of regularization weights for which the Huber-regularized
    rank problem keeps the constrained minimizer.

    ``delta_gap`` is the caller's value of the (generally unobservable)
    minimal positive violation; it must exceed ``(|Omega| - 1) g**2 / 4``.
    """
    for name, v in (("r_star", r_star), ("delta_gap", delta_gap),
                    ("omega_size", omega_size), ("g", g), ("epsilon", epsilon)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v!r}")
    slack = delta_gap - (omega_size - 1) * g * g / 4.0
    if slack <= 0:
        raise AssumptionError(
            "Assumption 2 violated: delta_gap must exceed (|Omega| - 1) g^2 / 4 "
            f"= {(omega_size - 1) * g * g / 4.0!r}, got {delta_gap!r}")
    lower = r_star / slack
    upper = 4.0 / (g * g * omega_size + epsilon)
    return LambdaWindow(lower, upper, lower <= upper)


@dataclass
class ConvexityProbeReport:
    delta_probed: float
    sample_points: int
    min_eigenvalue_found: float
    condition_holds: bool
    skipped_samples: int = 0
    max_asymmetry: float = 0.0
    eigenvalues: list = field(default_factory=list, repr=False)


def finite_difference_hessian(X, obs, delta, lam, step=None):
    """Central-difference Jacobian of the analytic gradient, ``(mn, mn)``.

    Returned unsymmetrized; column ``k`` is the derivative along entry ``k``
    of ``X.ravel()``.
    """
    X = as_matrix(X)
    m, n = X.shape
    if step is None:
        step = 1e-6 * max(1.0, float(np.abs(X).max(initial=0.0)))
    H = np.empty((m * n, m * n))
    E = np.zeros(m * n)
    for k in range(m * n):
        E[k] = step
        Ek = E.reshape(m, n)
        gp = objective_gradient(X + Ek, obs, delta, lam)
        gm = objective_gradient(X - Ek, obs, delta, lam)
        H[:, k] = ((gp - gm) / (2.0 * step)).ravel()
        E[k] = 0.0
    return H


def _ball_samples(center, radius, samples, rng):
    """``samples`` points uniform in the Frobenius ball; the first is the center."""
    d = center.size
    pts = [center]
    for _ in range(samples - 1):
        v = rng.standard_normal(d)
        v *= radius * rng.random() ** (1.0 / d) / np.linalg.norm(v)
        pts.append(center + v.reshape(center.shape))
    return pts


def convexity_probe(X_star, obs: ObservedMatrix, delta, lam, radius, samples,
                    seed) -> ConvexityProbeReport:
    """Sampled check that the objective Hessian is PSD on a Frobenius ball.

    Points where two singular values nearly coincide are skipped (the SVD
    based gradient is not differentiable there) and counted.
    """
    X_star = as_matrix(X_star, "X_star")
    obs.check_shape(X_star)
    if X_star.size > MAX_PROBE_ENTRIES:
        raise CapacityError(f"probe limited to {MAX_PROBE_ENTRIES} entries, "
                            f"got {X_star.shape}")
    if samples < 1:
        raise DomainError("samples must be at least 1")
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    if not delta > 0:
        raise DomainError("delta must be positive")
    rng = np.random.default_rng(seed)
    min_eig = np.inf
    skipped = 0
    asym = 0.0
    eigs = []
    for X in _ball_samples(X_star, radius, samples, rng):
        s = np.linalg.svd(X, compute_uv=False)
        scale = max(1.0, float(s[0]))
        if s.size > 1 and np.min(np.abs(np.diff(s))) <= REPEATED_SV_TOLERANCE * scale:
            skipped += 1
            continue
        H = finite_difference_hessian(X, obs, delta, lam)
        norm = max(np.abs(H).max(), np.finfo(float).tiny)
        asym = max(asym, float(np.abs(H - H.T).max() / norm))
        e = float(np.linalg.eigvalsh(0.5 * (H + H.T))[0])
        eigs.append(e)
        min_eig = min(min_eig, e)
    holds = bool(min_eig >= -PSD_TOLERANCE) if eigs else False
    return ConvexityProbeReport(float(delta), samples, float(min_eig), holds,
                                skipped, asym, eigs)


@dataclass
class DeltaSearchResult:
    delta: float
    trace: list  # (delta, condition_holds) in evaluation order


def suggest_delta(X_star, obs: ObservedMatrix, lam, radius, samples, seed,
                  grid_points=30, bisection_steps=30) -> DeltaSearchResult:
    """Smallest ``delta`` reachable by annealing from above while the sampled
    convexity probe keeps holding.

    A descending log grid over ``[1e-6, 1e3] * sigma_max`` locates the first
    failure; bisection in ``log(delta)`` then refines the boundary between
    the last passing and the first failing grid point.  If nothing on the
    grid fails, the bottom of the range is returned.
    """
    X_star = as_matrix(X_star, "X_star")
    smax = float(np.linalg.norm(X_star, 2))
    if smax == 0:
        raise DomainError("X_star must be nonzero")
    lo, hi = 1e-6 * smax, 1e3 * smax
    trace = []

    def holds(d):
        ok = convexity_probe(X_star, obs, d, lam, radius, samples, seed).condition_holds
        trace.append((d, ok))
        return ok

    grid = np.geomspace(hi, lo, grid_points)
    if not holds(grid[0]):
        raise SearchError(f"convexity fails already at delta={hi:.3g}; "
                          "no delta in range passes")
    passing, failing = grid[0], None
    for d in grid[1:]:
        if holds(d):
            passing = d
        else:
            failing = d
            break
    if failing is None:
        return DeltaSearchResult(float(passing), trace)
    a, b = np.log(failing), np.log(passing)
    for _ in range(bisection_steps):
        mid = 0.5 * (a + b)
        if holds(float(np.exp(mid))):
            b = mid
        else:
            a = mid
    return DeltaSearchResult(float(np.exp(b)), trace)
