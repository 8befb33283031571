"""Forecast quality metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DegenerateBaselineError", "ForecastSeries", "mase", "mase_aligned", "mse"]


class DegenerateBaselineError(ValueError):
    """The persistence baseline has zero total absolute error, so the scaled
    error is undefined (perfectly periodic actuals)."""


@dataclass
class ForecastSeries:
    """Forecasts aligned against actuals, scored from index ``lag`` onward.

    ``actuals`` must carry ``lag`` extra leading points of history so the
    persistence baseline (value ``lag`` steps earlier) exists for every
    scored point: len(actuals) == len(forecasts) + lag.
    """

    forecasts: np.ndarray
    actuals: np.ndarray
    lag: int

    def __post_init__(self):
        self.forecasts = np.asarray(self.forecasts, dtype=np.float64)
        self.actuals = np.asarray(self.actuals, dtype=np.float64)
        if self.lag < 1:
            raise ValueError(f"lag must be >= 1, got {self.lag}")
        if len(self.forecasts) < 1:
            raise ValueError("empty forecast series")
        if len(self.actuals) != len(self.forecasts) + self.lag:
            raise ValueError(
                f"need len(actuals) == len(forecasts) + lag: "
                f"{len(self.actuals)} != {len(self.forecasts)} + {self.lag}"
            )


def mase_aligned(forecasts, actuals, baseline) -> float:
    """Scaled error from pre-aligned sequences: sum |f - a| / sum |b - a|,
    where ``baseline`` holds the persistence forecast for each actual."""
    forecasts = np.asarray(forecasts, dtype=np.float64)
    actuals = np.asarray(actuals, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    if not (forecasts.shape == actuals.shape == baseline.shape) or forecasts.ndim != 1:
        raise ValueError("mase_aligned needs three equal-length 1-d sequences")
    if forecasts.size == 0:
        raise ValueError("empty forecast series")
    denom = float(np.sum(np.abs(baseline - actuals)))
    if denom == 0.0:
        raise DegenerateBaselineError("persistence baseline matches actuals exactly")
    return float(np.sum(np.abs(forecasts - actuals))) / denom


def mase(fs: ForecastSeries) -> float:
    """Mean absolute scaled error against the lag-L persistence forecast.
    Values below 1 beat persistence."""
    scored = fs.actuals[fs.lag :]
    baseline = fs.actuals[: -fs.lag]
    return mase_aligned(fs.forecasts, scored, baseline)


def mse(forecasts, actuals) -> float:
    forecasts = np.asarray(forecasts, dtype=np.float64)
    actuals = np.asarray(actuals, dtype=np.float64)
    if forecasts.shape != actuals.shape:
        raise ValueError(f"shape mismatch: {forecasts.shape} vs {actuals.shape}")
    if forecasts.size == 0:
        raise ValueError("empty sequences")
    return float(np.mean((forecasts - actuals) ** 2))
