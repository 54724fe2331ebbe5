"""Point-forecast error metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError


@dataclass(frozen=True)
class ForecastMetrics:
    mae: float
    rmse: float
    n: int


def evaluate(predictions, actuals) -> ForecastMetrics:
    """Mean absolute error and root mean squared error."""
    yhat = np.asarray(predictions, dtype=float).ravel()
    y = np.asarray(actuals, dtype=float).ravel()
    if yhat.size != y.size or y.size == 0:
        raise InvalidInputError("predictions and actuals need equal, nonzero lengths")
    err = yhat - y
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.sum(err**2 / y.size)))
    # Guard the Cauchy-Schwarz ordering against last-bit rounding.
    return ForecastMetrics(mae=mae, rmse=max(rmse, mae), n=int(y.size))


def naive_last_value(series, start: int) -> np.ndarray:
    """One-step persistence forecasts for ``series[start:]``."""
    s = np.asarray(series, dtype=float)
    return s[start - 1:-1].copy()
