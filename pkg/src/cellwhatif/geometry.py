"""Analytic cell-boundary geometry for a homogeneous single cell.

A cell's transmission-power / CIO adjustment (``delta_power_db``,
``delta_cio_db``) multiplies its offset received power by
``beta = 10 ** (0.1 * (delta_power_db + delta_cio_db))``.  Under quadratic
power decay the equal-offset-power locus between the adjusted cell (at the
origin) and a neighbor at distance ``R`` is the Apollonius circle

    (x + beta*R/(1-beta))^2 + y^2 = beta*R^2 / (1-beta)^2      (beta != 1)

and the perpendicular bisector ``x = R/2`` for ``beta == 1``.  With
neighbors every ``theta`` radians, the serving region per neighbor wedge is
bounded by that circle, and the after/before area ratio ``alpha(beta |
theta)`` is available in closed form.  ``alpha`` is what the forecasting
pipeline applies to a workload forecast as a multiplier.

Conventions: angles are radians everywhere in this module; degrees exist
only at CLI/HTTP boundaries.  The ``beta > 1`` branch uses the reflection
identity ``alpha(beta) = 2 - alpha(1/beta)``, which is a deliberate
simplification of the true outward-arc area; ``boundary_polyline`` +
``polygon_area`` expose the true area for comparison (see
``reflection_rule_gap``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

__all__ = [
    "AdjustmentDelta",
    "SectorGeometry",
    "ApolloniusCircle",
    "BisectorLine",
    "BoundaryShape",
    "McAreaEstimate",
    "beta_from_delta",
    "apollonius_boundary",
    "gamma_angle",
    "area_multiplier",
    "shaded_area",
    "mc_area_ratio",
    "boundary_polyline",
    "polygon_area",
    "escapes_wedge",
    "reflection_rule_gap",
]

# |beta - 1| below this returns alpha = 1 outright; between this and
# _SERIES_WINDOW the cubic series below is used (the raw Eq. form loses
# ~|1-beta|^-1 digits to cancellation as beta -> 1).
_UNITY_WINDOW = 1e-6
_SERIES_WINDOW = 1e-2


@dataclass(frozen=True)
class AdjustmentDelta:
    """A transmission-power / CIO adjustment pair, both in dB."""

    delta_power_db: float = 0.0
    delta_cio_db: float = 0.0

    def __post_init__(self) -> None:
        for name in ("delta_power_db", "delta_cio_db"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class SectorGeometry:
    """Angular interval between neighbors and (optionally) their distance."""

    theta_rad: float = math.pi / 3
    neighbor_distance: float | None = None

    def __post_init__(self) -> None:
        _check_theta(self.theta_rad)
        if self.neighbor_distance is not None and not self.neighbor_distance > 0:
            raise ValueError(
                f"neighbor_distance must be > 0, got {self.neighbor_distance!r}"
            )


@dataclass(frozen=True)
class ApolloniusCircle:
    """Equal-offset-power circle; center on the x-axis, concerned cell at origin."""

    center_x: float
    radius: float


@dataclass(frozen=True)
class BisectorLine:
    """Vertical equal-power line x = const (the beta == 1 boundary)."""

    x: float


BoundaryShape = Union[ApolloniusCircle, BisectorLine]


class McAreaEstimate(NamedTuple):
    estimate: float
    stderr: float
    samples: int


def _check_theta(theta_rad: float) -> None:
    if not (0.0 < theta_rad < math.pi):
        raise ValueError(f"theta_rad must lie in (0, pi), got {theta_rad!r}")


def _check_beta(beta: float) -> None:
    if not (math.isfinite(beta) and beta > 0.0):
        raise ValueError(f"beta must be finite and > 0, got {beta!r}")


def beta_from_delta(adj: AdjustmentDelta) -> float:
    """Linear offset-power ratio 10^(0.1 * (delta_power + delta_cio))."""
    return 10.0 ** (0.1 * (adj.delta_power_db + adj.delta_cio_db))


def apollonius_boundary(beta: float, neighbor_distance: float) -> BoundaryShape:
    """Boundary between the adjusted cell (origin) and a neighbor at distance R.

    Returns the Apollonius circle for ``beta != 1`` (center ``-beta*R/(1-beta)``,
    radius ``sqrt(beta)*R/|1-beta|``) and the bisector line ``x = R/2`` for
    ``beta == 1``.
    """
    _check_beta(beta)
    R = neighbor_distance
    if not (math.isfinite(R) and R > 0):
        raise ValueError(f"neighbor_distance must be > 0, got {R!r}")
    if beta == 1.0:
        return BisectorLine(x=R / 2.0)
    center_x = -beta * R / (1.0 - beta)
    radius = math.sqrt(beta) * R / abs(1.0 - beta)
    return ApolloniusCircle(center_x=center_x, radius=radius)


def gamma_angle(beta: float, theta_rad: float) -> float:
    """Half central angle of the per-wedge boundary arc, beta in (0, 1).

    gamma = theta/2 - arcsin(sqrt(beta) * sin(theta/2)); decreasing in beta,
    -> 0 as beta -> 1.
    """
    if not (math.isfinite(beta) and 0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    _check_theta(theta_rad)
    return theta_rad / 2.0 - math.asin(math.sqrt(beta) * math.sin(theta_rad / 2.0))


def _alpha_series(beta: float, theta_rad: float) -> float:
    # Cubic Taylor expansion in u = 1 - beta; coefficients verified against
    # 50-digit evaluation (relative error < 6e-10 at |u| = 1e-2).
    u = 1.0 - beta
    s2 = math.sin(theta_rad / 2.0) ** 2
    c2 = 1.0 - s2
    c1 = -(3.0 - 2.0 * s2) / (6.0 * c2)
    c2_ = (-8.0 * s2 * s2 + 20.0 * s2 - 9.0) / (48.0 * c2 * c2)
    c3 = (16.0 * s2**3 - 56.0 * s2 * s2 + 50.0 * s2 - 15.0) / (160.0 * c2**3)
    return 1.0 + u * (c1 + u * (c2_ + u * c3))


def area_multiplier(beta: float, theta_rad: float) -> float:
    """Cell-area ratio alpha(beta | theta) after/before the adjustment.

    Piecewise: the closed-form wedge-arc area for ``beta < 1``, exactly 1 at
    ``beta == 1``, and the reflection identity ``2 - alpha(1/beta)`` for
    ``beta > 1``.  Strictly increasing in beta with values in (0, 2).
    """
    _check_beta(beta)
    _check_theta(theta_rad)
    if beta > 1.0:
        return 2.0 - area_multiplier(1.0 / beta, theta_rad)
    if abs(beta - 1.0) < _UNITY_WINDOW:
        return 1.0
    if abs(beta - 1.0) < _SERIES_WINDOW:
        return _alpha_series(beta, theta_rad)
    g = gamma_angle(beta, theta_rad)
    alpha = (
        4.0
        * beta
        * (g - math.sqrt(beta) * math.sin(g))
        / ((1.0 - beta) ** 2 * math.tan(theta_rad / 2.0))
    )
    # The closed form already lands in (0, 1) for beta < 1; the clamp guards
    # pathological theta near the interval ends.
    return min(max(alpha, 5e-324), 2.0 - 5e-324)


def shaded_area(beta: float, theta_rad: float, neighbor_distance: float) -> float:
    """Absolute per-wedge serving area for beta in (0, 1), in m^2.

    Equals ``area_multiplier(beta, theta) * (R^2/4) * tan(theta/2)`` by
    construction, which keeps it consistent with the series-protected alpha
    near beta = 1.
    """
    if not (math.isfinite(beta) and 0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    _check_theta(theta_rad)
    R = neighbor_distance
    if not (math.isfinite(R) and R > 0):
        raise ValueError(f"neighbor_distance must be > 0, got {R!r}")
    return area_multiplier(beta, theta_rad) * 0.25 * R * R * math.tan(theta_rad / 2.0)


def mc_area_ratio(
    beta: float,
    theta_rad: float,
    samples: int,
    seed: int,
) -> McAreaEstimate:
    """Monte Carlo estimate of alpha for beta in (0, 1], with standard error.

    Samples uniformly over the beta = 1 wedge triangle (apex at the origin,
    half angle theta/2, truncated at the bisector x = R/2) and counts points
    the adjusted cell still serves, i.e. where
    ``beta * ((x - R)^2 + y^2) >= x^2 + y^2``.  The serving region is a
    subset of the triangle for beta <= 1, so the hit fraction estimates the
    area ratio directly.  Deterministic for a given seed.
    """
    if not (math.isfinite(beta) and 0.0 < beta <= 1.0):
        raise ValueError(f"beta must lie in (0, 1], got {beta!r}")
    _check_theta(theta_rad)
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples!r}")
    rng = np.random.default_rng(seed)
    half = math.tan(theta_rad / 2.0) / 2.0
    # Uniform sampling over triangle (0,0), (1/2, half), (1/2, -half) (R = 1).
    u = np.sqrt(rng.random(samples))
    v = rng.random(samples)
    x = 0.5 * u
    y = half * u * (2.0 * v - 1.0)
    hits = beta * ((x - 1.0) ** 2 + y**2) >= x**2 + y**2
    p = float(np.count_nonzero(hits)) / samples
    stderr = math.sqrt(max(p * (1.0 - p), 0.0) / samples)
    return McAreaEstimate(estimate=p, stderr=stderr, samples=samples)


def escapes_wedge(beta: float, theta_rad: float) -> bool:
    """True when the beta > 1 boundary arc no longer meets the sector rays.

    Beyond ``beta = 1 / sin(theta/2)^2`` the expanded region swallows the
    neighbor's circle entirely and the per-wedge construction degenerates;
    callers surface this as metadata rather than correcting alpha.
    """
    _check_beta(beta)
    _check_theta(theta_rad)
    return beta > 1.0 and beta * math.sin(theta_rad / 2.0) ** 2 > 1.0


def boundary_polyline(
    beta: float,
    theta_rad: float,
    neighbor_distance: float,
    n_neighbors: int = 6,
    n_points: int = 64,
) -> np.ndarray:
    """Closed polyline of the serving-region boundary around the origin.

    One wedge per neighbor (neighbors at angles ``i * theta``); ``n_points``
    vertices per wedge.  beta = 1 gives the equal-power polygon, beta < 1 the
    chain of inward Apollonius arcs, beta > 1 the outward arcs around each
    neighbor clipped at the sector rays.  The first vertex is repeated at the
    end to close the loop.  Shape: (n_neighbors * n_points + 1, 2).
    """
    _check_beta(beta)
    _check_theta(theta_rad)
    R = neighbor_distance
    if not (math.isfinite(R) and R > 0):
        raise ValueError(f"neighbor_distance must be > 0, got {R!r}")
    if n_neighbors < 3:
        raise ValueError(f"n_neighbors must be >= 3, got {n_neighbors!r}")
    if n_points < 8:
        raise ValueError(f"n_points must be >= 8, got {n_points!r}")
    if escapes_wedge(beta, theta_rad):
        raise ValueError(
            f"beta={beta!r} escapes the theta={theta_rad!r} wedge "
            "(beta * sin(theta/2)^2 > 1): the boundary arcs no longer close"
        )

    half = theta_rad / 2.0
    parts = []
    for i in range(n_neighbors):
        phi = i * theta_rad
        local = np.linspace(-half, half, n_points)
        if beta == 1.0:
            # Bisector segment at distance R/2, swept across the wedge.
            rho = (R / 2.0) / np.cos(local)
            pts = np.stack([rho * np.cos(local + phi), rho * np.sin(local + phi)], axis=1)
        elif beta < 1.0:
            g = gamma_angle(beta, theta_rad)
            d = beta * R / (1.0 - beta)
            r = math.sqrt(beta) * R / (1.0 - beta)
            ang = np.linspace(-g, g, n_points)
            # Circle centered at (-d, 0) in the wedge frame, rotated to phi.
            cx = -d * math.cos(phi)
            cy = -d * math.sin(phi)
            pts = np.stack(
                [cx + r * np.cos(ang + phi), cy + r * np.sin(ang + phi)], axis=1
            )
        else:
            xc = beta * R / (beta - 1.0)
            r = math.sqrt(beta) * R / (beta - 1.0)
            s = math.sin(half)
            # Distance along the sector ray to the arc (near intersection).
            disc = (beta * R * R / (beta - 1.0) ** 2) * (1.0 - beta * s * s)
            rho_ray = xc * math.cos(half) - math.sqrt(max(disc, 0.0))
            # Arc endpoint's central angle, measured from the -x direction at
            # the circle center (the arc faces the origin through angle pi).
            g = math.asin(min(rho_ray * s / r, 1.0))
            ang = np.linspace(math.pi + g, math.pi - g, n_points)
            cx = xc * math.cos(phi)
            cy = xc * math.sin(phi)
            pts = np.stack(
                [cx + r * np.cos(ang + phi), cy + r * np.sin(ang + phi)], axis=1
            )
        parts.append(pts)
    closed = np.concatenate(parts + [parts[0][:1]], axis=0)
    return closed


def polygon_area(points: np.ndarray) -> float:
    """Shoelace area of a closed polyline (first point == last point)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
        raise ValueError("expected a closed (n, 2) polyline with n >= 4")
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1])))


def reflection_rule_gap(
    beta: float,
    theta_rad: float,
    n_neighbors: int = 6,
    n_points: int = 4096,
) -> tuple[float, float]:
    """(alpha from Eq. reflection rule, true outward-arc area ratio).

    For beta > 1 the reflection identity underestimates the true arc-bounded
    area; this measures the gap via the dense boundary polyline.  For
    beta <= 1 the two coincide up to discretization.
    """
    alpha = area_multiplier(beta, theta_rad)
    poly = boundary_polyline(beta, theta_rad, 1.0, n_neighbors, n_points)
    base = n_neighbors * 0.25 * math.tan(theta_rad / 2.0)
    return alpha, polygon_area(poly) / base
