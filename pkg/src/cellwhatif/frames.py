"""Metric catalog and the masked multivariate time-series container.

The 17 monitored metrics fall into three clusters (7 workload, 1
interference, 9 QoS); three time features (day of week, hour, minute) are
derived from timestamps rather than stored.  ``MetricFrame.values`` holds
0.0 wherever ``mask`` is 0 — missing points are zero-filled by convention
so frames can feed models directly, and every consumer that cares about
missingness reads the mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

WORKLOAD_METRICS = [
    "rrc_conn_established",
    "erab_conn_established",
    "prb_dl_utilization",
    "prb_ul_utilization",
    "max_rrc_conn",
    "avg_rrc_conn",
    "cce_utilization",
]

INTERFERENCE_METRICS = ["avg_ul_prb_noise"]

QOS_METRICS = [
    "drop_rate",
    "conn_success_rate",
    "rrc_conn_success_rate",
    "erab_conn_success_rate",
    "erab_drop_rate_qci1",
    "erab_conn_success_rate_qci1",
    "handover_success_rate",
    "volte_handover_success_rate",
    "paging_congestion_rate",
]

ALL_METRICS = WORKLOAD_METRICS + INTERFERENCE_METRICS + QOS_METRICS

CLUSTERS: dict[str, list[str]] = {
    "workload": WORKLOAD_METRICS,
    "interference": INTERFERENCE_METRICS,
    "qos": QOS_METRICS,
}

TIME_FEATURES = ["day_of_week", "hour", "minute"]

# metrics bounded to [0, 1]
RATE_METRICS = frozenset(QOS_METRICS)
# metrics bounded to [0, 100] (percent)
UTILIZATION_METRICS = frozenset(
    ["prb_dl_utilization", "prb_ul_utilization", "cce_utilization"]
)

STEP_SECONDS = 15 * 60


def parse_rfc3339(text: str) -> int:
    """RFC-3339 UTC timestamp -> epoch seconds."""
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_rfc3339(epoch: int) -> str:
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


@dataclass
class MetricFrame:
    """Aligned (timestamps, values, mask) for one metric cluster.

    values: (T, d) float64, 0.0 at missing points; mask: (T, d) uint8 with 1
    where observed.
    """

    timestamps: np.ndarray
    columns: list[str]
    values: np.ndarray
    mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.mask is None:
            self.mask = np.ones_like(self.values, dtype=np.uint8)
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        T, d = self.values.shape
        if len(self.timestamps) != T or len(self.columns) != d:
            raise ValueError(
                f"shape mismatch: {T} steps x {d} cols vs "
                f"{len(self.timestamps)} timestamps, {len(self.columns)} names"
            )
        if self.mask.shape != self.values.shape:
            raise ValueError("mask shape must match values")
        # normalize the zero-fill convention
        self.values = np.where(self.mask == 1, self.values, 0.0)

    def __len__(self) -> int:
        return len(self.timestamps)

    def window(self, start: int, stop: int) -> "MetricFrame":
        return MetricFrame(
            timestamps=self.timestamps[start:stop],
            columns=self.columns,
            values=self.values[start:stop].copy(),
            mask=self.mask[start:stop].copy(),
        )

    def column_index(self, name: str) -> int:
        return self.columns.index(name)

    def equal(self, other: "MetricFrame") -> bool:
        return (
            self.columns == other.columns
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values, other.values)
        )


def validate_timestamps(timestamps: np.ndarray) -> None:
    """Strictly increasing 15-minute grid, else ValueError."""
    ts = np.asarray(timestamps, dtype=np.int64)
    if len(ts) >= 2:
        steps = np.diff(ts)
        if not np.all(steps == STEP_SECONDS):
            bad = int(np.argmax(steps != STEP_SECONDS))
            raise ValueError(
                f"timestamps must advance by exactly {STEP_SECONDS}s; "
                f"step {bad} -> {bad + 1} advances by {int(steps[bad])}s"
            )


def day_of_week(timestamps: np.ndarray) -> np.ndarray:
    """0 = Monday ... 6 = Sunday (1970-01-01 was a Thursday)."""
    days = np.asarray(timestamps, dtype=np.int64) // 86400
    return ((days + 3) % 7).astype(float)


def time_feature_frame(timestamps: np.ndarray) -> MetricFrame:
    """Derive the (day_of_week, hour, minute) features from timestamps."""
    ts = np.asarray(timestamps, dtype=np.int64)
    secs = ts % 86400
    vals = np.stack(
        [day_of_week(ts), (secs // 3600).astype(float), ((secs % 3600) // 60).astype(float)],
        axis=1,
    )
    return MetricFrame(timestamps=ts, columns=list(TIME_FEATURES), values=vals)


def encode_time_features(frame: MetricFrame) -> np.ndarray:
    """Sine/cosine pairs for each time feature: (T, 6) array.

    day_of_week over period 7, hour over 24, minute over 60.
    """
    dow = frame.values[:, frame.column_index("day_of_week")]
    hour = frame.values[:, frame.column_index("hour")]
    minute = frame.values[:, frame.column_index("minute")]
    parts = []
    for series, period in ((dow, 7.0), (hour, 24.0), (minute, 60.0)):
        ang = 2.0 * np.pi * series / period
        parts.extend([np.sin(ang), np.cos(ang)])
    return np.stack(parts, axis=1)


TIME_ENCODED_DIM = 6
