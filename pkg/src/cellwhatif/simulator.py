"""Deterministic synthetic cellular scenarios.

Generates per-cell monitored time series as ground truth for
parameter-adjustment effects.  Generation follows the variable-cluster
graph: a usage-density field integrated over each cell's serving region
gives the workload; interference is pure periodic envelope plus noise; QoS
responds to the realized workload and interference through documented
logistic congestion curves.

Serving regions are the offset-RSRP argmax (hysteresis-free virtual
boundaries): a cell with offset transmission power P claims the points
where ``distance / sqrt(P)`` is minimal, which is a multiplicatively
weighted Voronoi region.  Power adjustments therefore move real region
boundaries — the generator knows nothing about the analytic area
multiplier it is later used to validate.

All randomness (metric noise, missingness) derives from the scenario seed
via per-(cell, stream) child generators, so identical configs produce
bit-identical datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from cellwhatif import frames
from cellwhatif.density import DensityField, uniform_density
from cellwhatif.frames import MetricFrame
from cellwhatif.geometry import AdjustmentDelta
from cellwhatif.mwvoronoi import RasterGrid, SitePoint, assign_regions, region_accumulate

__all__ = [
    "CellConfig",
    "HexLayout",
    "TemporalConfig",
    "NoiseConfig",
    "WorkloadMaps",
    "QosParams",
    "AdjustmentEvent",
    "ScenarioConfig",
    "CellSeries",
    "CellDataset",
    "hex_scenario",
    "rsrp_at",
    "select_cell",
    "serving_workload",
    "qos_response",
    "synthesize",
]

MAX_TX_POWER_DBM = 49.0


@dataclass(frozen=True)
class CellConfig:
    id: int
    x: float
    y: float
    tx_power_dbm: float = 46.0
    cio_db: float = 0.0
    sector_theta_rad: float = math.pi / 3

    def issues(self) -> list[str]:
        out = []
        if self.tx_power_dbm > MAX_TX_POWER_DBM:
            out.append(
                f"cell {self.id}: tx_power_dbm {self.tx_power_dbm} exceeds "
                f"{MAX_TX_POWER_DBM}"
            )
        if not (0.0 < self.sector_theta_rad < math.pi):
            out.append(f"cell {self.id}: sector_theta_rad outside (0, pi)")
        return out


@dataclass(frozen=True)
class HexLayout:
    rings: int = 2
    spacing_m: float = 500.0


@dataclass(frozen=True)
class TemporalConfig:
    start: str = "2026-01-05T00:00:00Z"  # a Monday
    horizon: int = 1344  # data points (15-min steps); 1344 = two weeks
    interval_minutes: int = 15
    base_level: float = 0.6
    daily_amplitude: float = 1.0
    peak_hour: float = 18.0
    weekend_dip: float = 0.4
    interference_base: float = 2.0
    interference_amplitude: float = 1.2
    interference_peak_hour: float = 3.0

    def issues(self) -> list[str]:
        out = []
        if self.interval_minutes != 15:
            out.append("interval_minutes is fixed at 15")
        if self.horizon < 1:
            out.append("horizon must be >= 1")
        if self.base_level < 0 or self.daily_amplitude < 0:
            out.append("envelope levels must be >= 0")
        if not (0.0 <= self.weekend_dip <= 1.0):
            out.append("weekend_dip must lie in [0, 1]")
        return out


@dataclass(frozen=True)
class NoiseConfig:
    """Relative (multiplicative) Gaussian noise std per cluster, plus missingness."""

    workload_std: float = 0.02
    interference_std: float = 0.05
    qos_std: float = 0.002
    missing_rate: float = 0.01

    def issues(self) -> list[str]:
        out = []
        if min(self.workload_std, self.interference_std, self.qos_std) < 0:
            out.append("noise stds must be >= 0")
        if not (0.0 <= self.missing_rate < 1.0):
            out.append("missing_rate must lie in [0, 1)")
        return out


@dataclass(frozen=True)
class WorkloadMaps:
    """Fixed monotone maps from integrated usage mass to the 7 workload metrics.

    Counts are linear in the mass; utilizations are capacity-capped linear
    ramps ``100 * min(mass / capacity, 1)``, i.e. they scale with the mass
    until saturation.
    """

    rrc_established_per_mass: float = 12.0
    erab_established_per_mass: float = 9.0
    max_rrc_per_mass: float = 1.8
    avg_rrc_per_mass: float = 1.1
    dl_capacity: float = 100.0
    ul_capacity: float = 140.0
    cce_capacity: float = 120.0

    def apply(self, mass):
        mass = np.asarray(mass, dtype=float)
        cols = {
            "rrc_conn_established": self.rrc_established_per_mass * mass,
            "erab_conn_established": self.erab_established_per_mass * mass,
            "prb_dl_utilization": 100.0 * np.minimum(mass / self.dl_capacity, 1.0),
            "prb_ul_utilization": 100.0 * np.minimum(mass / self.ul_capacity, 1.0),
            "max_rrc_conn": self.max_rrc_per_mass * mass,
            "avg_rrc_conn": self.avg_rrc_per_mass * mass,
            "cce_utilization": 100.0 * np.minimum(mass / self.cce_capacity, 1.0),
        }
        return np.stack([cols[name] for name in frames.WORKLOAD_METRICS], axis=-1)


@dataclass(frozen=True)
class QosParams:
    """Documented closed forms for the 9 QoS responses.

    Congestion level: ``g(u) = (sig(k*(u - u0)) - sig(-k*u0)) / (1 - sig(-k*u0))``
    with ``sig`` the logistic function, normalized so g(0) = 0 and g(inf) = 1.
    Stress: ``u = (w_load * dl_util/100 + w_intf * intf/intf_ref) * (1 + time_gain * daily(t))``.
    Success rates are ``ceiling - depth * g``; drop rates are one minus a
    retention curve of the same family, so drop/retention identities hold
    exactly; the paging congestion rate rises from its floor.
    """

    steepness: float = 8.0
    midpoint: float = 0.75
    w_load: float = 1.0
    w_intf: float = 0.3
    intf_ref: float = 5.0
    time_gain: float = 0.15
    qos_peak_hour: float = 20.0
    ceilings: tuple[float, ...] = (0.999, 0.999, 0.998, 0.997, 0.995, 0.993)
    depths: tuple[float, ...] = (0.25, 0.20, 0.22, 0.30, 0.15, 0.20)
    drop_retention_ceiling: float = 0.999
    drop_depth: float = 0.10
    erab_drop_retention_ceiling: float = 0.998
    erab_drop_depth: float = 0.12
    paging_floor: float = 0.0
    paging_depth: float = 0.20

    def congestion(self, stress):
        u = np.asarray(stress, dtype=float)
        k, u0 = self.steepness, self.midpoint
        sig = lambda z: 1.0 / (1.0 + np.exp(-z))  # noqa: E731
        lo = sig(-k * u0)
        return (sig(k * (u - u0)) - lo) / (1.0 - lo)


@dataclass(frozen=True)
class AdjustmentEvent:
    cell_id: int
    delta: AdjustmentDelta
    apply_index: int

    def issues(self, horizon: int, cell_ids: set[int]) -> list[str]:
        out = []
        if self.cell_id not in cell_ids:
            out.append(f"adjustment references unknown cell {self.cell_id}")
        if not (0 <= self.apply_index < horizon):
            out.append(
                f"adjustment apply_index {self.apply_index} outside [0, {horizon})"
            )
        return out


@dataclass(frozen=True)
class ScenarioConfig:
    cells: tuple[CellConfig, ...]
    layout: HexLayout = field(default_factory=HexLayout)
    hys_db: float = 2.0
    density: DensityField = field(default_factory=lambda: uniform_density(2e-4))
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    workload_maps: WorkloadMaps = field(default_factory=WorkloadMaps)
    qos_params: QosParams = field(default_factory=QosParams)
    adjustments: tuple[AdjustmentEvent, ...] = ()
    seed: int = 0
    raster_resolution: int = 512
    raster_margin: float = 1.25  # bbox half-extent = (rings + margin) * spacing

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "adjustments", tuple(self.adjustments))

    def issues(self) -> list[str]:
        out = []
        if len(self.cells) < 2:
            out.append("need at least 2 cells")
        ids = [c.id for c in self.cells]
        if len(set(ids)) != len(ids):
            out.append("cell ids must be unique")
        for c in self.cells:
            out.extend(c.issues())
        out.extend(self.temporal.issues())
        out.extend(self.noise.issues())
        cell_ids = set(ids)
        for adj in self.adjustments:
            out.extend(adj.issues(self.temporal.horizon, cell_ids))
        if self.raster_resolution < 16:
            out.append("raster_resolution must be >= 16")
        if self.hys_db < 0:
            out.append("hys_db must be >= 0")
        return out

    def validate(self) -> None:
        problems = self.issues()
        if problems:
            raise ValueError(
                "invalid scenario config:\n" + "\n".join(f"  - {p}" for p in problems)
            )

    def cell_by_id(self, cell_id: int) -> CellConfig:
        for c in self.cells:
            if c.id == cell_id:
                return c
        raise KeyError(f"unknown cell id {cell_id}")

    def grid(self) -> RasterGrid:
        half = (self.layout.rings + self.raster_margin) * self.layout.spacing_m
        return RasterGrid.square(half, self.raster_resolution)

    def timestamps(self) -> np.ndarray:
        start = frames.parse_rfc3339(self.temporal.start)
        return start + frames.STEP_SECONDS * np.arange(
            self.temporal.horizon, dtype=np.int64
        )


@dataclass
class CellSeries:
    cell_id: int
    workload: MetricFrame
    interference: MetricFrame
    qos: MetricFrame
    adjustments: list[AdjustmentEvent] = field(default_factory=list)

    @property
    def timestamps(self) -> np.ndarray:
        return self.workload.timestamps

    def cluster(self, name: str) -> MetricFrame:
        if name == "time":
            return frames.time_feature_frame(self.timestamps)
        return {"workload": self.workload, "interference": self.interference,
                "qos": self.qos}[name]


@dataclass
class CellDataset:
    cells: dict[int, CellSeries]
    seed: int = 0

    def __getitem__(self, cell_id: int) -> CellSeries:
        return self.cells[cell_id]


def hex_scenario(
    rings: int = 2,
    spacing_m: float = 500.0,
    tx_power_dbm: float = 46.0,
    theta_rad: float = math.pi / 3,
    **overrides,
) -> ScenarioConfig:
    """Homogeneous hexagonal deployment: a center cell plus ``rings`` rings."""
    cells = []
    positions = [(0.0, 0.0)]
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            if q == 0 and r == 0:
                continue
            if max(abs(q), abs(r), abs(q + r)) <= rings:
                positions.append(
                    (spacing_m * (q + r / 2.0), spacing_m * math.sqrt(3.0) / 2.0 * r)
                )
    for i, (x, y) in enumerate(positions):
        cells.append(
            CellConfig(id=i, x=x, y=y, tx_power_dbm=tx_power_dbm,
                       sector_theta_rad=theta_rad)
        )
    return ScenarioConfig(cells=tuple(cells), layout=HexLayout(rings, spacing_m), **overrides)


def rsrp_at(cell: CellConfig, x: float, y: float) -> float:
    """Received power on a linear scale: 10^(0.1 tau) / d^2 (quadratic decay)."""
    d2 = (x - cell.x) ** 2 + (y - cell.y) ** 2
    if d2 == 0.0:
        raise ValueError("point coincides with the cell position")
    return 10.0 ** (0.1 * cell.tx_power_dbm) / d2


def select_cell(
    x: float,
    y: float,
    cells: list[CellConfig] | tuple[CellConfig, ...],
    current_id: int,
    hys_db: float = 0.0,
) -> int:
    """Handover decision at a point: stay unless a neighbor's CIO-offset RSRP
    beats the serving cell's by more than the hysteresis margin.

    The winning neighbor is the one with the highest offset RSRP; exact
    score ties resolve to the lowest cell id.
    """
    by_id = {c.id: c for c in cells}
    if current_id not in by_id:
        raise KeyError(f"unknown current cell id {current_id}")

    def offset_score(c: CellConfig) -> float:
        return rsrp_at(c, x, y) * 10.0 ** (0.1 * c.cio_db)

    current_score = offset_score(by_id[current_id])
    best_id, best_score = None, -math.inf
    for c in sorted(cells, key=lambda c: c.id):
        if c.id == current_id:
            continue
        s = offset_score(c)
        if s > best_score:
            best_id, best_score = c.id, s
    if best_id is None:
        return current_id
    if best_score > current_score * 10.0 ** (0.1 * hys_db):
        return best_id
    return current_id


def _effective_cells(config: ScenarioConfig, t: int) -> list[CellConfig]:
    """Cell configs with every adjustment applied at or before index t."""
    cells = {c.id: c for c in config.cells}
    for adj in config.adjustments:
        if adj.apply_index <= t:
            c = cells[adj.cell_id]
            cells[adj.cell_id] = replace(
                c,
                tx_power_dbm=c.tx_power_dbm + adj.delta.delta_power_db,
                cio_db=c.cio_db + adj.delta.delta_cio_db,
            )
    return [cells[c.id] for c in config.cells]


def _region_masses(config: ScenarioConfig, t: int) -> np.ndarray:
    """Density integral over each cell's serving region at time index t."""
    cells = _effective_cells(config, t)
    sites = [
        SitePoint(c.x, c.y, math.sqrt(10.0 ** (0.1 * (c.tx_power_dbm + c.cio_db))))
        for c in cells
    ]
    grid = config.grid()
    raster = assign_regions(sites, grid)
    counts = raster.counts()
    if np.any(counts < 4):
        small = [cells[i].id for i in np.nonzero(counts < 4)[0]]
        raise ResolutionError(
            f"serving regions of cells {small} span fewer than 4 raster "
            "cells; refine raster_resolution"
        )
    return np.array(
        [region_accumulate(raster, config.density, i) for i in range(len(cells))]
    )


class ResolutionError(RuntimeError):
    """Raster too coarse to resolve a serving region."""


def _epoch_table(config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """(breakpoints, masses[epoch, cell]) for the piecewise-constant regions."""
    breaks = sorted({0} | {a.apply_index for a in config.adjustments})
    masses = np.stack([_region_masses(config, t) for t in breaks], axis=0)
    return np.asarray(breaks, dtype=np.int64), masses


def _workload_envelope(config: ScenarioConfig, ts: np.ndarray) -> np.ndarray:
    tc = config.temporal
    tod_hours = (ts % 86400) / 3600.0
    daily = 0.5 * (1.0 + np.cos(2.0 * np.pi * (tod_hours - tc.peak_hour) / 24.0))
    dow = frames.day_of_week(ts)
    weekly = 1.0 - tc.weekend_dip * (dow >= 5)
    return (tc.base_level + tc.daily_amplitude * daily) * weekly


def _interference_envelope(config: ScenarioConfig, ts: np.ndarray) -> np.ndarray:
    tc = config.temporal
    tod_hours = (ts % 86400) / 3600.0
    daily = 0.5 * (
        1.0 + np.cos(2.0 * np.pi * (tod_hours - tc.interference_peak_hour) / 24.0)
    )
    return tc.interference_base + tc.interference_amplitude * daily


def _qos_daily(params: QosParams, ts: np.ndarray) -> np.ndarray:
    tod_hours = (ts % 86400) / 3600.0
    return 0.5 * (1.0 + np.cos(2.0 * np.pi * (tod_hours - params.qos_peak_hour) / 24.0))


def _noise_stream(config: ScenarioConfig, cell_index: int, stream: int, n: int):
    return np.random.default_rng([config.seed, cell_index, stream]).standard_normal(n)


def _mass_series(config: ScenarioConfig, cell_index: int,
                 breaks: np.ndarray, masses: np.ndarray) -> np.ndarray:
    ts = config.timestamps()
    env = _workload_envelope(config, ts)
    idx = np.searchsorted(breaks, np.arange(config.temporal.horizon), side="right") - 1
    return env * masses[idx, cell_index]


def serving_workload(
    config: ScenarioConfig,
    cell_id: int,
    t: int,
    noise_free: bool = False,
) -> np.ndarray:
    """The cell's 7 workload metrics at time index t (seeded noise included).

    Integrates the time-modulated density over the hysteresis-free serving
    region in force at t, maps the mass through the configured monotone
    metric maps, and applies the cell's seeded noise stream for index t.
    """
    config.validate()
    if not (0 <= t < config.temporal.horizon):
        raise ValueError(f"t={t} outside horizon [0, {config.temporal.horizon})")
    cell_index = [c.id for c in config.cells].index(cell_id)
    breaks, masses = _epoch_table(config)
    mass = _mass_series(config, cell_index, breaks, masses)[t]
    metrics = config.workload_maps.apply(mass)
    if not noise_free and config.noise.workload_std > 0:
        eps = np.stack(
            [
                _noise_stream(config, cell_index, 100 + m, config.temporal.horizon)
                for m in range(len(frames.WORKLOAD_METRICS))
            ],
            axis=1,
        )[t]
        metrics = metrics * (1.0 + config.noise.workload_std * eps)
    return _clamp_workload(metrics)


def _clamp_workload(values: np.ndarray) -> np.ndarray:
    out = np.maximum(values, 0.0)
    for j, name in enumerate(frames.WORKLOAD_METRICS):
        if name in frames.UTILIZATION_METRICS:
            out[..., j] = np.minimum(out[..., j], 100.0)
    return out


def qos_response(
    workload: np.ndarray,
    interference: np.ndarray,
    ts: np.ndarray,
    params: QosParams | None = None,
) -> np.ndarray:
    """The 9 QoS metrics from realized workload, interference, and time.

    ``workload`` is the (..., 7) workload metric array; the load proxy is
    the PRB downlink utilization.  Total function on valid inputs; outputs
    clamped to [0, 1].
    """
    params = params or QosParams()
    workload = np.asarray(workload, dtype=float)
    load = workload[..., frames.WORKLOAD_METRICS.index("prb_dl_utilization")] / 100.0
    intf = np.asarray(interference, dtype=float) / params.intf_ref
    stress = (params.w_load * load + params.w_intf * intf) * (
        1.0 + params.time_gain * _qos_daily(params, np.asarray(ts))
    )
    g = params.congestion(stress)
    success_names = [
        "conn_success_rate",
        "rrc_conn_success_rate",
        "erab_conn_success_rate",
        "erab_conn_success_rate_qci1",
        "handover_success_rate",
        "volte_handover_success_rate",
    ]
    cols = {}
    for name, ceil_, depth in zip(success_names, params.ceilings, params.depths):
        cols[name] = ceil_ - depth * g
    cols["drop_rate"] = 1.0 - (params.drop_retention_ceiling - params.drop_depth * g)
    cols["erab_drop_rate_qci1"] = 1.0 - (
        params.erab_drop_retention_ceiling - params.erab_drop_depth * g
    )
    cols["paging_congestion_rate"] = params.paging_floor + params.paging_depth * g
    out = np.stack([cols[name] for name in frames.QOS_METRICS], axis=-1)
    return np.clip(out, 0.0, 1.0)


def synthesize(config: ScenarioConfig) -> CellDataset:
    """Generate the full dataset for every cell in the scenario.

    Deterministic for a given config (seed included); step changes in the
    serving regions occur exactly at each adjustment's apply index.
    """
    config.validate()
    ts = config.timestamps()
    frames.validate_timestamps(ts)
    horizon = config.temporal.horizon
    breaks, masses = _epoch_table(config)
    qos_daily_ts = ts

    dataset: dict[int, CellSeries] = {}
    for cell_index, cell in enumerate(config.cells):
        mass = _mass_series(config, cell_index, breaks, masses)
        w = config.workload_maps.apply(mass)
        if config.noise.workload_std > 0:
            eps = np.stack(
                [
                    _noise_stream(config, cell_index, 100 + m, horizon)
                    for m in range(len(frames.WORKLOAD_METRICS))
                ],
                axis=1,
            )
            w = w * (1.0 + config.noise.workload_std * eps)
        w = _clamp_workload(w)

        intf = _interference_envelope(config, ts)
        if config.noise.interference_std > 0:
            intf = intf * (
                1.0 + config.noise.interference_std * _noise_stream(config, cell_index, 200, horizon)
            )
        intf = np.maximum(intf, 0.0)

        q = qos_response(w, intf, qos_daily_ts, config.qos_params)
        if config.noise.qos_std > 0:
            eps = np.stack(
                [
                    _noise_stream(config, cell_index, 300 + m, horizon)
                    for m in range(len(frames.QOS_METRICS))
                ],
                axis=1,
            )
            q = np.clip(q * (1.0 + config.noise.qos_std * eps), 0.0, 1.0)

        def sample_mask(stream: int, width: int) -> np.ndarray:
            if config.noise.missing_rate <= 0:
                return np.ones((horizon, width), dtype=np.uint8)
            u = np.random.default_rng([config.seed, cell_index, stream]).random(
                (horizon, width)
            )
            return (u >= config.noise.missing_rate).astype(np.uint8)

        dataset[cell.id] = CellSeries(
            cell_id=cell.id,
            workload=MetricFrame(ts, list(frames.WORKLOAD_METRICS), w,
                                 sample_mask(400, len(frames.WORKLOAD_METRICS))),
            interference=MetricFrame(ts, list(frames.INTERFERENCE_METRICS),
                                     intf[:, None],
                                     sample_mask(401, 1)),
            qos=MetricFrame(ts, list(frames.QOS_METRICS), q,
                            sample_mask(402, len(frames.QOS_METRICS))),
            adjustments=[a for a in config.adjustments if a.cell_id == cell.id],
        )
    return CellDataset(cells=dataset, seed=config.seed)
