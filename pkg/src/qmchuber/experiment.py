"""Missing-rate x seed experiment grid and hyperparameter grid search."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data_io import generate_synthetic, load_ratings, make_split
from .errors import DomainError, QMCError, SearchError
from .evaluation import evaluate, rmse
from .quantization import ObservedMatrix, QuantizationScheme
from .solver import SolverConfig, solve

logger = logging.getLogger(__name__)

CSV_HEADER = ["missing_rate", "seed", "rmse_continuous", "rmse_quantized",
              "accuracy", "runtime_seconds", "outer_iters"]


@dataclass(frozen=True)
class SyntheticSpec:
    rows: int
    cols: int
    rank: int

    @classmethod
    def parse(cls, text):
        """``"60x50x3"`` -> ``SyntheticSpec(60, 50, 3)``."""
        try:
            rows, cols, rank = (int(v) for v in text.lower().split("x"))
        except ValueError:
            raise ValueError(f"synthetic spec must look like ROWSxCOLSxRANK, got {text!r}") from None
        return cls(rows, cols, rank)


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: QuantizationScheme
    missing_rates: tuple
    seeds: tuple
    solver: SolverConfig = field(default_factory=SolverConfig)
    data_path: str | None = None
    synthetic: SyntheticSpec | None = None
    delimiter: str = "\t"
    parallel: int = 1
    record_runtime: bool = True

    def __post_init__(self):
        if (self.data_path is None) == (self.synthetic is None):
            raise ValueError("exactly one of data_path and synthetic must be given")
        if not self.missing_rates or not self.seeds:
            raise ValueError("missing_rates and seeds must be nonempty")
        bad = [r for r in self.missing_rates if not 0 < r < 1]
        if bad:
            raise DomainError(f"missing rates must lie in (0, 1), got {bad}")
        if self.parallel < 1:
            raise ValueError("parallel must be at least 1")


@dataclass
class ExperimentRow:
    missing_rate: float
    seed: object  # int, or "mean" for aggregate rows
    rmse_continuous: float
    rmse_quantized: float
    accuracy: float
    runtime_seconds: float
    outer_iters: float
    baseline_rmse: float = math.nan
    error: str | None = None


@dataclass
class ExperimentResult:
    rows: list
    means: list

    @property
    def errors(self):
        return [(r.missing_rate, r.seed, r.error) for r in self.rows if r.error]


def source_observations(config: ExperimentConfig, seed: int) -> ObservedMatrix:
    """Fully known observation set the split is carved from."""
    if config.data_path is not None:
        return load_ratings(config.data_path, config.delimiter, config.scheme).to_observed()
    s = config.synthetic
    return generate_synthetic(s.rows, s.cols, s.rank, config.scheme, 1.0, seed).observed


def run_cell(config: ExperimentConfig, missing_rate: float, seed: int,
             source: ObservedMatrix | None = None) -> ExperimentRow:
    """Split, solve on train, evaluate on test.  Errors are captured in the row."""
    try:
        if source is None:
            source = source_observations(config, seed)
        split = make_split(source, missing_rate, seed)
        t0 = time.perf_counter()
        report = solve(split.train, config.solver)
        elapsed = time.perf_counter() - t0
        ev = evaluate(report.recovered, split.train, split.test)
    except QMCError as exc:
        logger.warning("rate=%s seed=%s failed: %s", missing_rate, seed, exc)
        nan = math.nan
        return ExperimentRow(missing_rate, seed, nan, nan, nan, nan, nan,
                             error=f"{type(exc).__name__}: {exc}")
    return ExperimentRow(missing_rate, seed, ev.rmse_continuous, ev.rmse_quantized,
                         ev.accuracy, elapsed if config.record_runtime else math.nan,
                         report.outer_iterations, ev.baseline_rmse)


def _cell(args):
    return run_cell(*args)


def _mean_row(rate, rows):
    ok = [r for r in rows if r.error is None]
    if not ok:
        nan = math.nan
        return ExperimentRow(rate, "mean", nan, nan, nan, nan, nan, error="all runs failed")
    avg = lambda name: float(np.mean([getattr(r, name) for r in ok]))
    return ExperimentRow(rate, "mean", avg("rmse_continuous"), avg("rmse_quantized"),
                         avg("accuracy"), avg("runtime_seconds"), avg("outer_iters"),
                         avg("baseline_rmse"))


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """One row per ``(missing_rate, seed)`` plus one mean row per rate.

    Rows come back ordered by ``(rate, seed)`` whatever the completion order
    of parallel workers.
    """
    rates = sorted(config.missing_rates)
    seeds = sorted(config.seeds)
    shared = None
    if config.data_path is not None:
        # the ratings file is the same for every cell; parse it once
        shared = source_observations(config, seeds[0])
    cells = [(config, r, s, shared) for r in rates for s in seeds]
    if config.parallel > 1:
        with ProcessPoolExecutor(max_workers=config.parallel) as pool:
            rows = list(pool.map(_cell, cells))
    else:
        rows = [_cell(c) for c in cells]
    means = [_mean_row(r, [row for row in rows if row.missing_rate == r]) for r in rates]
    return ExperimentResult(rows, means)


def _fmt(v):
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def format_csv(result: ExperimentResult) -> str:
    """CSV text: seed rows of each rate followed by that rate's mean row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for mean in result.means:
        for row in result.rows:
            if row.missing_rate == mean.missing_rate:
                w.writerow([_fmt(getattr(row, h)) for h in CSV_HEADER])
        w.writerow([_fmt(getattr(mean, h)) for h in CSV_HEADER])
    return buf.getvalue()


GRID_PARAMS = ("step_size", "decay_factor", "regularization", "delta_init_constant")


@dataclass
class GridSearchResult:
    best: SolverConfig
    best_score: float
    table: list  # dicts with the four parameters, "rmse" and "error"


def grid_search(base: SolverConfig, grids: dict, train: ObservedMatrix,
                validation_fraction: float = 0.1, seed: int = 0) -> GridSearchResult:
    """Exhaustive search scored on a validation split carved from ``train``.

    ``grids`` maps any of ``step_size``, ``decay_factor``, ``regularization``,
    ``delta_init_constant`` to candidate values; missing keys keep the base
    value.  The test split never enters this function.  Ties on validation
    RMSE go to the lexicographically smallest parameter tuple.
    """
    unknown = set(grids) - set(GRID_PARAMS)
    if unknown:
        raise ValueError(f"unknown grid parameters: {sorted(unknown)}")
    axes = [sorted(grids.get(p, [getattr(base, p)])) for p in GRID_PARAMS]
    if any(len(a) == 0 for a in axes):
        raise ValueError("grids must be nonempty")
    split = make_split(train, validation_fraction, seed)
    if len(split.test) == 0:
        raise ValueError("validation split is empty; raise validation_fraction")
    table = []
    for values in itertools.product(*axes):
        params = dict(zip(GRID_PARAMS, values))
        entry = dict(params, rmse=math.nan, error=None)
        try:
            cfg = replace(base, **params)
            report = solve(split.train, cfg)
            entry["rmse"] = rmse(report.recovered, split.test)
        except QMCError as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        table.append(entry)
    ok = [e for e in table if e["error"] is None]
    if not ok:
        raise SearchError("every grid point failed")
    best = min(ok, key=lambda e: (e["rmse"],) + tuple(e[p] for p in GRID_PARAMS))
    return GridSearchResult(replace(base, **{p: best[p] for p in GRID_PARAMS}),
                            best["rmse"], table)
