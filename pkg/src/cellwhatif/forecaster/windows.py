"""Sliding-window sample assembly for the per-cluster models.

A sample at anchor ``t`` carries the cluster's own scaled history over
``[t-I, t-1]``, its parents over the same span, parents over the target
span ``[t, t+O-1]``, and the scaled target truth with both observation
masks.  Missing points are zero-filled everywhere; masks travel alongside
for the loss.  Time features are sine/cosine-encoded, never scaled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cellwhatif import frames
from cellwhatif.forecaster.graph import GraphicalModel
from cellwhatif.forecaster.scaler import Scaler, apply_values
from cellwhatif.simulator import CellSeries


@dataclass
class WindowSample:
    cluster: str
    cell_id: int
    t_index: int  # first forecast step
    x_src: np.ndarray  # (I, d) scaled, zero-filled
    w_src: np.ndarray  # (I, d) observation mask
    pa_src: np.ndarray  # (I, p)
    pa_tgt: np.ndarray  # (O, p)
    y: np.ndarray  # (O, d) scaled truth, zero-filled
    w_y: np.ndarray  # (O, d)

    @property
    def input_len(self) -> int:
        return self.x_src.shape[0]

    @property
    def output_len(self) -> int:
        return self.y.shape[0]


def parent_matrix(
    series: CellSeries,
    cluster: str,
    graph: GraphicalModel,
    scalers: dict[str, Scaler],
) -> np.ndarray:
    """(T, p) matrix of the cluster's declared parent series, scaled.

    Raises if a scaler is supplied for a non-parent cluster's data path —
    the graph is the single authority on what a model may read.
    """
    blocks = []
    for p in graph.series_parents(cluster):
        if p == "time":
            blocks.append(frames.encode_time_features(series.cluster("time")))
        else:
            frame = series.cluster(p)
            blocks.append(apply_values(scalers[p], frame.values))
    if not blocks:
        return np.zeros((len(series.timestamps), 0))
    return np.concatenate(blocks, axis=1)


def build_windows(
    series: CellSeries,
    cluster: str,
    graph: GraphicalModel,
    scalers: dict[str, Scaler],
    input_len: int,
    output_len: int,
    stride: int = 1,
    adjustment_free: bool = True,
) -> list[WindowSample]:
    """All windows of the series for one cluster, oldest first.

    With ``adjustment_free`` (the pre-training setting) a window is kept
    only if its full span ``[t-I, t+O)`` ends before the cell's first
    adjustment.
    """
    if cluster not in graph.cluster_metrics:
        raise KeyError(f"unknown cluster {cluster!r}")
    if input_len % 2 != 0:
        raise ValueError("input_len must be even (the decoder reads its half)")
    frame = series.cluster(cluster)
    x = apply_values(scalers[cluster], frame.values)
    pa = parent_matrix(series, cluster, graph, scalers)
    T = len(frame)
    limit = T
    if adjustment_free and series.adjustments:
        limit = min(limit, min(a.apply_index for a in series.adjustments))
    out = []
    for t in range(input_len, limit - output_len + 1, stride):
        out.append(
            WindowSample(
                cluster=cluster,
                cell_id=series.cell_id,
                t_index=t,
                x_src=x[t - input_len : t],
                w_src=frame.mask[t - input_len : t].astype(float),
                pa_src=pa[t - input_len : t],
                pa_tgt=pa[t : t + output_len],
                y=x[t : t + output_len],
                w_y=frame.mask[t : t + output_len].astype(float),
            )
        )
    return out


def window_at(
    series: CellSeries,
    cluster: str,
    graph: GraphicalModel,
    scalers: dict[str, Scaler],
    input_len: int,
    output_len: int,
    t: int,
) -> WindowSample:
    """The single window anchored at forecast start ``t`` (bounds checked)."""
    T = len(series.cluster(cluster))
    if not (input_len <= t <= T - output_len):
        raise ValueError(
            f"t={t} outside valid anchor range [{input_len}, {T - output_len}]"
        )
    frame = series.cluster(cluster)
    x = apply_values(scalers[cluster], frame.values)
    pa = parent_matrix(series, cluster, graph, scalers)
    return WindowSample(
        cluster=cluster,
        cell_id=series.cell_id,
        t_index=t,
        x_src=x[t - input_len : t],
        w_src=frame.mask[t - input_len : t].astype(float),
        pa_src=pa[t - input_len : t],
        pa_tgt=pa[t : t + output_len],
        y=x[t : t + output_len],
        w_y=frame.mask[t : t + output_len].astype(float),
    )


def seasonal_naive(window: WindowSample, period: int = 96) -> np.ndarray:
    """Copy the last full period of the history as the forecast (scaled space)."""
    I, O = window.input_len, window.output_len
    if I < period:
        raise ValueError(f"input_len {I} shorter than period {period}")
    last = window.x_src[I - period : I]
    reps = int(np.ceil(O / period))
    return np.tile(last, (reps, 1))[:O]
