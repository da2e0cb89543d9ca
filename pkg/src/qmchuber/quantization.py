"""Uniform quantization model and the sparse observation structure.

A quantized entry reported at level center ``m`` is known to lie in the
closed interval ``[m - g/2, m + g/2]`` where ``g`` is the gap between
consecutive levels.  Dense matrices are plain ``float64`` numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def as_matrix(X, name="X"):
    """Return ``X`` as a finite 2-D float64 array (no copy when possible)."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} contains non-finite entries")
    return A


@dataclass(frozen=True)
class QuantizationScheme:
    """Uniformly spaced quantization levels.

    ``level_values`` are stored explicitly so schemes that do not start at
    zero (ratings 1..5, say) stay exact.
    """

    level_values: tuple
    gap: float

    def __post_init__(self):
        levels = tuple(float(v) for v in self.level_values)
        object.__setattr__(self, "level_values", levels)
        object.__setattr__(self, "gap", float(self.gap))
        if len(levels) < 2:
            raise DomainError("a quantization scheme needs at least two levels")
        if not (self.gap > 0 and math.isfinite(self.gap)):
            raise DomainError(f"gap must be positive and finite, got {self.gap}")
        diffs = np.diff(levels)
        if not np.allclose(diffs, self.gap, rtol=1e-12, atol=0.0):
            raise DomainError("level values must increase by exactly the gap")

    @classmethod
    def uniform(cls, num_levels: int, gap: float = 1.0, first: float = 1.0):
        """``num_levels`` centers ``first, first + gap, ...``."""
        if num_levels < 2:
            raise DomainError("a quantization scheme needs at least two levels")
        return cls(tuple(first + k * gap for k in range(num_levels)), gap)

    @property
    def num_levels(self) -> int:
        return len(self.level_values)

    @property
    def lowest_bound(self) -> float:
        return self.level_values[0] - self.gap / 2

    @property
    def highest_bound(self) -> float:
        return self.level_values[-1] + self.gap / 2

    def center(self, level_index: int) -> float:
        if not 0 <= level_index < self.num_levels:
            raise IndexError(f"level index {level_index} out of range "
                             f"[0, {self.num_levels})")
        return self.level_values[level_index]

    def centers(self, level_indices) -> np.ndarray:
        """Vectorized ``center`` (no range check beyond numpy indexing)."""
        return np.asarray(self.level_values)[np.asarray(level_indices, dtype=np.intp)]

    def bounds_of(self, level_index: int) -> tuple[float, float]:
        m = self.center(level_index)
        return m - self.gap / 2, m + self.gap / 2

    def quantize(self, value: float) -> int:
        """Nearest level index; clamps beyond the extreme levels, ties go up."""
        if not math.isfinite(value):
            raise DomainError(f"cannot quantize non-finite value {value!r}")
        return int(self.quantize_array(np.array([value]))[0])

    def quantize_array(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise DomainError("cannot quantize non-finite values")
        k = np.floor((v - self.level_values[0]) / self.gap + 0.5)
        return np.clip(k, 0, self.num_levels - 1).astype(np.intp)


def bounds_of(scheme: QuantizationScheme, level_index: int) -> tuple[float, float]:
    return scheme.bounds_of(level_index)


def quantize(scheme: QuantizationScheme, value: float) -> int:
    return scheme.quantize(value)


@dataclass(frozen=True)
class ObservedMatrix:
    """Partially observed quantized ``rows x cols`` matrix.

    Observations are held as three parallel integer arrays ``(i, j, level)``
    kept in the order they were supplied.
    """

    rows: int
    cols: int
    i: np.ndarray
    j: np.ndarray
    levels: np.ndarray
    scheme: QuantizationScheme
    _centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise DimensionError("matrix dimensions must be nonnegative")
        i = np.asarray(self.i, dtype=np.intp).ravel()
        j = np.asarray(self.j, dtype=np.intp).ravel()
        lv = np.asarray(self.levels, dtype=np.intp).ravel()
        if not (len(i) == len(j) == len(lv)):
            raise DimensionError("observation arrays must have equal length")
        if len(i):
            if i.min() < 0 or i.max() >= self.rows or j.min() < 0 or j.max() >= self.cols:
                raise DimensionError("observation index out of range")
            if lv.min() < 0 or lv.max() >= self.scheme.num_levels:
                raise DomainError("level index out of range for the scheme")
            flat = i * self.cols + j
            if len(np.unique(flat)) != len(flat):
                raise DomainError("duplicate (i, j) observation")
        object.__setattr__(self, "i", _frozen(i))
        object.__setattr__(self, "j", _frozen(j))
        object.__setattr__(self, "levels", _frozen(lv))
        object.__setattr__(self, "_centers", _frozen(self.scheme.centers(lv)))

    @classmethod
    def from_triples(cls, rows, cols, triples: Sequence[tuple], scheme):
        if len(triples) == 0:
            return cls(rows, cols, [], [], [], scheme)
        i, j, lv = zip(*triples)
        return cls(rows, cols, i, j, lv, scheme)

    @classmethod
    def from_dense_levels(cls, level_matrix, mask, scheme):
        """Observe ``level_matrix[mask]`` (row-major order)."""
        mask = np.asarray(mask, dtype=bool)
        i, j = np.nonzero(mask)
        return cls(mask.shape[0], mask.shape[1], i, j,
                   np.asarray(level_matrix)[i, j], scheme)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def gap(self) -> float:
        return self.scheme.gap

    @property
    def centers(self) -> np.ndarray:
        return self._centers

    @property
    def lower(self) -> np.ndarray:
        return self._centers - self.scheme.gap / 2

    @property
    def upper(self) -> np.ndarray:
        return self._centers + self.scheme.gap / 2

    def __len__(self):
        return len(self.i)

    @property
    def observations(self):
        return list(zip(self.i.tolist(), self.j.tolist(), self.levels.tolist()))

    def subset(self, index) -> "ObservedMatrix":
        """Keep the observations selected by ``index`` (positions into Omega)."""
        index = np.asarray(index, dtype=np.intp)
        return ObservedMatrix(self.rows, self.cols, self.i[index], self.j[index],
                              self.levels[index], self.scheme)

    def mask(self) -> np.ndarray:
        M = np.zeros(self.shape, dtype=bool)
        M[self.i, self.j] = True
        return M

    def zero_filled(self) -> np.ndarray:
        """Level centers at observed positions, zeros elsewhere."""
        M = np.zeros(self.shape)
        M[self.i, self.j] = self._centers
        return M

    def values_of(self, X) -> np.ndarray:
        """Entries of ``X`` at the observed positions, in observation order."""
        X = as_matrix(X)
        self.check_shape(X)
        return X[self.i, self.j]

    def check_shape(self, X):
        if X.shape != self.shape:
            raise DimensionError(f"matrix shape {X.shape} does not match "
                                 f"observation shape {self.shape}")


def violation_count(X, obs: ObservedMatrix) -> int:
    """Number of observed entries of ``X`` outside their quantization bounds."""
    x = obs.values_of(X)
    return int(np.count_nonzero((x < obs.lower) | (x > obs.upper)))
