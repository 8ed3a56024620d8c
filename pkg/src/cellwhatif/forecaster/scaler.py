"""Scale-only preprocessing: divide each metric by its training maximum.

No centering — shifting the data would break the multiplicative semantics
of the area multiplier, which is applied to forecasts in this scaled space.
Metrics with no observed points (or a non-positive maximum) keep scale 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from cellwhatif.frames import MetricFrame


@dataclass(frozen=True)
class Scaler:
    columns: tuple[str, ...]
    scales: np.ndarray  # (d,) strictly positive

    def __post_init__(self) -> None:
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=float))
        if self.scales.shape != (len(self.columns),):
            raise ValueError("one scale per column required")
        if not np.all(self.scales > 0):
            raise ValueError("scales must be strictly positive")


def fit_scaler(training: Iterable[MetricFrame]) -> Scaler:
    """Per-metric maximum over observed points across all training frames."""
    training = list(training)
    if not training:
        raise ValueError("no training frames")
    columns = tuple(training[0].columns)
    maxima = np.zeros(len(columns))
    any_observed = np.zeros(len(columns), dtype=bool)
    for frame in training:
        if tuple(frame.columns) != columns:
            raise ValueError("all training frames must share one column set")
        observed = frame.mask == 1
        vals = np.where(observed, frame.values, -np.inf)
        col_has = observed.any(axis=0)
        col_max = vals.max(axis=0)
        maxima = np.where(col_has, np.maximum(maxima, np.where(np.isfinite(col_max), col_max, 0.0)), maxima)
        any_observed |= col_has
    scales = np.where(any_observed & (maxima > 0), maxima, 1.0)
    return Scaler(columns=columns, scales=scales)


def apply_scaler(scaler: Scaler, frame: MetricFrame) -> MetricFrame:
    _check(scaler, frame.columns)
    return MetricFrame(
        timestamps=frame.timestamps,
        columns=list(frame.columns),
        values=frame.values / scaler.scales,
        mask=frame.mask.copy(),
    )


def invert_scaler(scaler: Scaler, frame: MetricFrame) -> MetricFrame:
    _check(scaler, frame.columns)
    return MetricFrame(
        timestamps=frame.timestamps,
        columns=list(frame.columns),
        values=frame.values * scaler.scales,
        mask=frame.mask.copy(),
    )


def apply_values(scaler: Scaler, values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=float) / scaler.scales


def invert_values(scaler: Scaler, values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=float) * scaler.scales


def _check(scaler: Scaler, columns) -> None:
    if tuple(columns) != scaler.columns:
        raise ValueError(
            f"frame columns {tuple(columns)} do not match scaler columns "
            f"{scaler.columns}"
        )
