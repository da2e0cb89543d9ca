"""Translated Huber penalty on quantization bounds.

Inside the bounds (``|x - m| <= g/2``) the loss is quadratic, outside it
grows linearly, and the whole curve is shifted down by ``g**2 / 4`` so that
feasible entries score negative and violations positive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .quantization import ObservedMatrix, as_matrix


def _check_finite(x):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("huber loss requires finite arguments")
    return x


def huber_translated(x, center, gap):
    """Elementwise translated Huber loss; minimum ``-gap**2/4`` at ``center``."""
    x = _check_finite(x)
    r = np.abs(x - center)
    quad = r * r
    lin = gap * (r - 0.25 * gap)
    out = np.where(r <= 0.5 * gap, quad, lin) - 0.25 * gap * gap
    return out if out.ndim else float(out)


def huber_derivative(x, center, gap):
    """Elementwise derivative: ``-g``, ``2(x - m)`` or ``g`` by region."""
    x = _check_finite(x)
    out = np.clip(2.0 * (x - center), -gap, gap)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class HuberParams:
    gap: float
    center: float

    def __post_init__(self):
        if not self.gap > 0:
            raise DomainError(f"gap must be positive, got {self.gap}")

    def value(self, x):
        return huber_translated(x, self.center, self.gap)

    def derivative(self, x):
        return huber_derivative(x, self.center, self.gap)


def huber_sum(X, obs: ObservedMatrix) -> float:
    """Sum of the translated Huber loss over the observed entries."""
    x = obs.values_of(X)
    if len(x) == 0:
        return 0.0
    return float(np.sum(huber_translated(x, obs.centers, obs.gap)))


def huber_gradient(X, obs: ObservedMatrix) -> np.ndarray:
    """Gradient of :func:`huber_sum`; zero off the observation set."""
    X = as_matrix(X)
    obs.check_shape(X)
    G = np.zeros_like(X)
    if len(obs):
        G[obs.i, obs.j] = huber_derivative(X[obs.i, obs.j], obs.centers, obs.gap)
    return G
