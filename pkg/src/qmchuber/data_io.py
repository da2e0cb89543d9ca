"""Ratings ingestion, synthetic instances, train/test masking, matrix files."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError, ValidationError
from .quantization import ObservedMatrix, QuantizationScheme, as_matrix

MOVIELENS_SCHEME = QuantizationScheme.uniform(5, gap=1.0, first=1.0)


@dataclass(frozen=True)
class RatingsDataset:
    user_count: int
    item_count: int
    users: np.ndarray
    items: np.ndarray
    levels: np.ndarray
    timestamps: np.ndarray
    scheme: QuantizationScheme

    @property
    def records(self):
        return list(zip(self.users.tolist(), self.items.tolist(),
                        self.levels.tolist(), self.timestamps.tolist()))

    def __len__(self):
        return len(self.users)

    def to_observed(self) -> ObservedMatrix:
        return ObservedMatrix(self.user_count, self.item_count, self.users,
                              self.items, self.levels, self.scheme)


def load_ratings(path, delimiter="\t", scheme=MOVIELENS_SCHEME,
                 user_count=None, item_count=None) -> RatingsDataset:
    """Read ``user item rating timestamp`` lines with 1-based ids.

    Ratings must coincide with a level center of ``scheme``.  Blank lines
    are skipped; dimensions default to the largest index seen.
    """
    centers = {c: k for k, c in enumerate(scheme.level_values)}
    users, items, levels, stamps = [], [], [], []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(delimiter) if delimiter else line.split()
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", lineno)
            try:
                u, it = int(parts[0]), int(parts[1])
                rating = float(parts[2])
                ts = int(parts[3])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if u < 1 or it < 1:
                raise ValidationError(f"line {lineno}: ids are 1-based, got ({u}, {it})")
            if rating not in centers:
                raise ValidationError(f"line {lineno}: rating {parts[2]} is not a level "
                                      f"of the scheme {scheme.level_values}")
            key = (u - 1, it - 1)
            if key in seen:
                raise ValidationError(f"line {lineno}: duplicate rating for user {u}, item {it}")
            seen.add(key)
            users.append(u - 1)
            items.append(it - 1)
            levels.append(centers[rating])
            stamps.append(ts)
    n_users = max(users) + 1 if users else 0
    n_items = max(items) + 1 if items else 0
    if user_count is not None:
        if user_count < n_users:
            raise ValidationError(f"user_count {user_count} < largest user id {n_users}")
        n_users = user_count
    if item_count is not None:
        if item_count < n_items:
            raise ValidationError(f"item_count {item_count} < largest item id {n_items}")
        n_items = item_count
    as_int = lambda v: np.asarray(v, dtype=np.intp)
    return RatingsDataset(n_users, n_items, as_int(users), as_int(items),
                          as_int(levels), np.asarray(stamps, dtype=np.int64), scheme)


@dataclass(frozen=True)
class MaskSplit:
    train: ObservedMatrix
    test: ObservedMatrix
    missing_rate: float
    seed: int


def make_split(obs: ObservedMatrix, missing_rate: float, seed: int) -> MaskSplit:
    """Hold out ``floor(missing_rate * |Omega|)`` observations uniformly at random."""
    if not 0 < missing_rate < 1:
        raise DomainError(f"missing_rate must lie in (0, 1), got {missing_rate}")
    n = len(obs)
    n_test = int(math.floor(missing_rate * n))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return MaskSplit(obs.subset(train_idx), obs.subset(test_idx), missing_rate, seed)


@dataclass(frozen=True)
class SyntheticInstance:
    ground_truth: np.ndarray
    observed: ObservedMatrix
    true_rank: int
    seed: int


def generate_synthetic(rows, cols, rank, scheme: QuantizationScheme,
                       observation_fraction=1.0, seed=0) -> SyntheticInstance:
    """Quantized, uniformly masked observations of a random rank-``rank`` matrix.

    The matrix is ``a * A @ B.T + b`` with ``rank - 1`` Gaussian factor
    columns; the constant offset is the remaining rank-one term, so the
    affine map onto ``[lowest + g/4, highest - g/4]`` does not raise the rank.
    """
    if not 1 <= rank <= min(rows, cols):
        raise DomainError(f"rank must lie in [1, {min(rows, cols)}], got {rank}")
    if not 0 < observation_fraction <= 1:
        raise DomainError("observation_fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    g = scheme.gap
    lo = scheme.lowest_bound + g / 4
    hi = scheme.highest_bound - g / 4
    A = rng.standard_normal((rows, rank - 1))
    B = rng.standard_normal((cols, rank - 1))
    X0 = A @ B.T
    spread = X0.max() - X0.min() if X0.size else 0.0
    if rank == 1 or spread == 0.0:
        X = np.full((rows, cols), 0.5 * (lo + hi))
    else:
        a = (hi - lo) / spread
        X = a * (X0 - X0.min()) + lo
    # the affine map can land a hair outside [lo, hi] through rounding
    X = np.clip(X, lo, hi)
    levels = scheme.quantize_array(X)

    n_obs = int(round(observation_fraction * rows * cols))
    if observation_fraction == 1:
        mask = np.ones((rows, cols), dtype=bool)
    else:
        mask = np.zeros(rows * cols, dtype=bool)
        mask[rng.choice(rows * cols, size=n_obs, replace=False)] = True
        mask = mask.reshape(rows, cols)
    observed = ObservedMatrix.from_dense_levels(levels, mask, scheme)
    return SyntheticInstance(X, observed, rank, seed)


def save_matrix(path, X):
    """Write ``rows cols`` then one line of ``repr`` floats per row."""
    X = as_matrix(X)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for row in X:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("missing dimension header", 1)
    head = lines[0].split()
    try:
        rows, cols = (int(v) for v in head)
    except ValueError:
        raise ParseError(f"bad dimension header {lines[0]!r}", 1) from None
    if rows < 0 or cols < 0:
        raise ParseError("negative dimensions", 1)
    body = lines[1:]
    while body and not body[-1].strip() and len(body) > rows:
        body.pop()
    if len(body) != rows:
        raise ParseError(f"header declares {rows} rows, found {len(body)}")
    X = np.empty((rows, cols))
    for r, line in enumerate(body):
        vals = line.split()
        if len(vals) != cols:
            raise ParseError(f"expected {cols} values, found {len(vals)}", r + 2)
        try:
            X[r] = [float(v) for v in vals]
        except ValueError as exc:
            raise ParseError(str(exc), r + 2) from None
    return X


def save_observed(path, obs: ObservedMatrix):
    """Observation file: header ``rows cols gap first_level num_levels`` then
    ``i j level_index`` lines (0-based)."""
    s = obs.scheme
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{obs.rows} {obs.cols} {s.gap!r} {s.level_values[0]!r} {s.num_levels}\n")
        for i, j, k in obs.observations:
            fh.write(f"{i} {j} {k}\n")


def load_observed(path) -> ObservedMatrix:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("missing header", 1)
    try:
        r, c, gap, first, n = lines[0].split()
        rows, cols, num = int(r), int(c), int(n)
        scheme = QuantizationScheme.uniform(num, float(gap), float(first))
    except ValueError as exc:
        raise ParseError(f"bad header: {exc}", 1) from None
    triples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            i, j, k = (int(v) for v in line.split())
        except ValueError:
            raise ParseError(f"expected 'i j level', got {line!r}", lineno) from None
        triples.append((i, j, k))
    return ObservedMatrix.from_triples(rows, cols, triples, scheme)
