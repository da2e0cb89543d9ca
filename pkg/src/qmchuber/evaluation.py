"""Recovery metrics and the global-mean reference predictor."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .quantization import ObservedMatrix


@dataclass(frozen=True)
class EvalResult:
    rmse_continuous: float
    rmse_quantized: float
    accuracy: float
    baseline_rmse: float


def rmse(recovered, test: ObservedMatrix) -> float:
    """Root mean squared error against the held-out level centers."""
    if len(test) == 0:
        raise DomainError("cannot compute RMSE on an empty test set")
    x = test.values_of(recovered)
    return float(np.sqrt(np.mean((x - test.centers) ** 2)))


def quantized_predictions(recovered, test: ObservedMatrix) -> np.ndarray:
    """Level indices predicted at the test positions."""
    return test.scheme.quantize_array(test.values_of(recovered))


def baseline_mean_fill(train: ObservedMatrix) -> np.ndarray:
    if len(train) == 0:
        raise DomainError("baseline needs at least one training observation")
    return np.full(train.shape, float(np.mean(train.centers)))


def evaluate(recovered, train: ObservedMatrix, test: ObservedMatrix) -> EvalResult:
    pred = quantized_predictions(recovered, test)
    q_centers = test.scheme.centers(pred)
    return EvalResult(
        rmse_continuous=rmse(recovered, test),
        rmse_quantized=float(np.sqrt(np.mean((q_centers - test.centers) ** 2))),
        accuracy=float(np.mean(pred == test.levels)),
        baseline_rmse=rmse(baseline_mean_fill(train), test),
    )
