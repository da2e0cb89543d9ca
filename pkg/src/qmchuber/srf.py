"""Gaussian smoothed rank function and its SVD-based gradient.

For an ``m x n`` matrix with singular values ``s_1 >= ... >= s_k``,
``k = min(m, n)``::

    F(X)   = sum_i exp(-s_i**2 / (2 delta**2))
    SRF(X) = k - F(X)        -> rank(X) as delta -> 0

``srf_gradient`` returns dF/dX; the smoothed rank itself has gradient
``-srf_gradient``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DomainError, NumericalError
from .quantization import as_matrix


class SvdResult(NamedTuple):
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray


def thin_svd(X) -> SvdResult:
    X = as_matrix(X)
    try:
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed on a {X.shape} matrix: {exc}") from exc
    return SvdResult(U, s, Vt.T)


def _check_delta(delta):
    if not (delta > 0 and np.isfinite(delta)):
        raise DomainError(f"delta must be positive and finite, got {delta!r}")


def srf_from_singular_values(s, delta) -> float:
    # -expm1 keeps full precision when s << delta
    return float(np.sum(-np.expm1(-(s * s) / (2.0 * delta * delta))))


def srf_value(X, delta: float) -> float:
    """Smoothed rank ``min(m, n) - F_delta(X)``, a value in ``[0, min(m, n)]``."""
    _check_delta(delta)
    X = as_matrix(X)
    if X.size == 0:
        return 0.0
    s = np.linalg.svd(X, compute_uv=False)
    return srf_from_singular_values(s, delta)


def gradient_from_svd(svd: SvdResult, delta) -> np.ndarray:
    """dF/dX = U diag(-(s/delta**2) exp(-s**2/(2 delta**2))) V^T."""
    U, s, V = svd
    d = -(s / (delta * delta)) * np.exp(-(s * s) / (2.0 * delta * delta))
    return (U * d) @ V.T


def srf_gradient(X, delta: float) -> np.ndarray:
    _check_delta(delta)
    X = as_matrix(X)
    if X.size == 0:
        return np.zeros_like(X)
    return gradient_from_svd(thin_svd(X), delta)


def srf_value_and_gradient(X, delta: float):
    """``(srf_value, srf_gradient)`` from a single SVD."""
    _check_delta(delta)
    X = as_matrix(X)
    if X.size == 0:
        return 0.0, np.zeros_like(X)
    svd = thin_svd(X)
    return srf_from_singular_values(svd.singular_values, delta), gradient_from_svd(svd, delta)


def frobenius_limit_gap(X, delta: float) -> float:
    """Relative gap between the smoothed rank and ``||X||_F**2 / (2 delta**2)``.

    Shrinks like ``1/delta**2`` for large ``delta``.
    """
    _check_delta(delta)
    X = as_matrix(X)
    fro2 = float(np.sum(X * X))
    if fro2 == 0.0:
        raise DomainError("relative gap is undefined for the zero matrix")
    limit = fro2 / (2.0 * delta * delta)
    return abs(srf_value(X, delta) - limit) / limit


def numerical_rank(X, rtol: float = 1e-3) -> int:
    """Count of singular values above ``rtol * sigma_max``."""
    s = np.linalg.svd(as_matrix(X), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))
