import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from cellwhatif import geometry as G
from cellwhatif.density import DensityField, GaussianBlob, uniform_density
from cellwhatif.mwvoronoi import (
    DidDensityEstimate,
    LabeledRaster,
    RasterGrid,
    ResolutionExceeded,
    SitePoint,
    assign_regions,
    did_density_estimate,
    read_raster_pgm,
    region_accumulate,
    region_area,
    site_density_limit,
    write_raster_pgm,
)


def hex_sites(spacing=1.0, rings=1, weight=1.0):
    pts = [SitePoint(0.0, 0.0, weight)]
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            if q == 0 and r == 0:
                continue
            if max(abs(q), abs(r), abs(q + r)) <= rings:
                pts.append(
                    SitePoint(spacing * (q + r / 2.0), spacing * math.sqrt(3) / 2 * r, weight)
                )
    return pts


class TestAssignRegions:
    def test_two_equal_sites_split_by_bisector(self):
        grid = RasterGrid(-1.0, -1.0, 1.0, 1.0, 64, 64)
        sites = [SitePoint(-0.5, 0.0), SitePoint(0.5, 0.0)]
        raster = assign_regions(sites, grid)
        X, _ = grid.centers()
        assert np.array_equal(raster.labels, (X > 0).astype(np.int32))

    def test_equal_weights_match_ordinary_voronoi(self):
        rng = np.random.default_rng(11)
        pts = rng.uniform(-1, 1, size=(12, 2))
        sites = [SitePoint(x, y, 1.0) for x, y in pts]
        grid = RasterGrid(-1.0, -1.0, 1.0, 1.0, 256, 256)
        raster = assign_regions(sites, grid)
        X, Y = grid.centers()
        _, idx = cKDTree(pts).query(np.stack([X.ravel(), Y.ravel()], axis=1))
        assert np.array_equal(raster.labels.ravel(), idx.astype(np.int32))

    def test_weighted_two_site_boundary_is_apollonius_circle(self):
        beta = 0.5
        R = 1.0
        grid = RasterGrid(-3.0, -3.0, 3.0, 3.0, 512, 512)
        sites = [SitePoint(0.0, 0.0, math.sqrt(beta)), SitePoint(R, 0.0, 1.0)]
        raster = assign_regions(sites, grid)
        circle = G.apollonius_boundary(beta, R)
        lab = raster.labels
        edge = np.zeros_like(lab, dtype=bool)
        edge[:, :-1] |= lab[:, :-1] != lab[:, 1:]
        edge[:-1, :] |= lab[:-1, :] != lab[1:, :]
        X, Y = grid.centers()
        d = np.hypot(X[edge] - circle.center_x, Y[edge])
        tol = math.hypot(grid.dx, grid.dy)
        assert float(np.abs(d - circle.radius).max()) <= tol

    def test_vanishing_weight_shrinks_to_site(self):
        grid = RasterGrid(-1.0, -1.0, 1.0, 1.0, 128, 128)
        sites = [SitePoint(0.2, -0.1, 1e-6), SitePoint(-0.5, 0.4, 1.0)]
        raster = assign_regions(sites, grid)
        cells = np.count_nonzero(raster.labels == 0)
        assert cells <= 1

    def test_weight_scaling_invariance(self):
        grid = RasterGrid(-1.0, -1.0, 1.0, 1.0, 128, 128)
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1, 1, size=(5, 2))
        ws = rng.uniform(0.5, 2.0, size=5)
        base = assign_regions([SitePoint(x, y, w) for (x, y), w in zip(pts, ws)], grid)
        for lam in (2.0, 0.5):
            scaled = assign_regions(
                [SitePoint(x, y, w * lam) for (x, y), w in zip(pts, ws)], grid
            )
            assert np.array_equal(base.labels, scaled.labels)

    def test_needs_two_sites(self):
        grid = RasterGrid(-1.0, -1.0, 1.0, 1.0, 32, 32)
        with pytest.raises(ValueError):
            assign_regions([SitePoint(0, 0)], grid)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            RasterGrid(0, 0, 0, 1, 32, 32)
        with pytest.raises(ValueError):
            RasterGrid(-1, -1, 1, 1, 8, 32)
        with pytest.raises(ValueError):
            SitePoint(0, 0, 0.0)


class TestRegionMeasures:
    def test_hex_interior_areas_equal(self):
        sites = hex_sites(spacing=1.0, rings=2)
        grid = RasterGrid.square(1.8, 512)
        raster = assign_regions(sites, grid)
        hex_area = math.sqrt(3) / 2
        # ring-1 cells and the center are interior for a 2-ring layout
        interior = [i for i, s in enumerate(sites) if math.hypot(s.x, s.y) < 1.01]
        assert len(interior) == 7
        for i in interior:
            assert region_area(raster, i) == pytest.approx(hex_area, rel=0.02)

    def test_partition_sums_to_bbox(self):
        sites = hex_sites(rings=1)
        grid = RasterGrid(-1.3, -1.1, 1.2, 1.4, 96, 80)
        raster = assign_regions(sites, grid)
        total = sum(region_area(raster, i) for i in range(len(sites)))
        assert total == pytest.approx(grid.bbox_area, rel=1e-12)
        assert raster.counts().sum() == grid.nx * grid.ny

    def test_tiny_weight_tiny_area(self):
        grid = RasterGrid.square(1.0, 128)
        areas = []
        for phi in (1.0, 0.3, 0.1):
            sites = [SitePoint(0.0, 0.0, phi), SitePoint(0.7, 0.0, 1.0), SitePoint(-0.7, 0.1, 1.0)]
            areas.append(region_area(assign_regions(sites, grid), 0))
        assert areas[0] > areas[1] > areas[2]

    def test_index_out_of_range(self):
        grid = RasterGrid.square(1.0, 32)
        raster = assign_regions([SitePoint(-0.5, 0), SitePoint(0.5, 0)], grid)
        with pytest.raises(IndexError):
            region_area(raster, 2)
        with pytest.raises(IndexError):
            region_accumulate(raster, uniform_density(1.0), -1)

    def test_uniform_density_accumulates_area_times_c(self):
        grid = RasterGrid.square(1.0, 64)
        raster = assign_regions([SitePoint(-0.4, 0), SitePoint(0.4, 0)], grid)
        c = 3.25
        for i in (0, 1):
            assert region_accumulate(raster, uniform_density(c), i) == pytest.approx(
                c * region_area(raster, i), rel=1e-12
            )

    def test_accumulator_partition_additivity(self):
        grid = RasterGrid.square(1.0, 64)
        sites = hex_sites(rings=1, spacing=0.9)
        raster = assign_regions(sites, grid)
        rho = DensityField(uniform=0.5, blobs=(GaussianBlob(0.2, -0.3, 0.4, 2.0),))
        total = sum(region_accumulate(raster, rho, i) for i in range(len(sites)))
        X, Y = grid.centers()
        direct = float(np.sum(rho.evaluate(X, Y))) * grid.cell_area
        assert total == pytest.approx(direct, rel=1e-12)

    def test_gaussian_blob_mass_recovered(self):
        # blob well inside region 0; closed-form mass = A * 2 pi sigma^2
        grid = RasterGrid.square(2.0, 512)
        sites = [SitePoint(-1.0, 0.0, 1.0), SitePoint(1.0, 0.0, 1.0)]
        raster = assign_regions(sites, grid)
        blob = GaussianBlob(-1.0, 0.0, 0.08, 5.0)
        got = region_accumulate(raster, DensityField(blobs=(blob,)), 0)
        assert got == pytest.approx(blob.total_mass, rel=0.01)

    def test_refinement_stability(self):
        sites = hex_sites(rings=1)
        coarse = assign_regions(sites, RasterGrid.square(1.6, 256))
        fine = assign_regions(sites, RasterGrid.square(1.6, 512))
        a0 = region_area(coarse, 0)
        a1 = region_area(fine, 0)
        assert abs(a1 - a0) / a0 < 0.02


class TestSiteDensityLimit:
    def test_uniform_is_exact(self):
        grid = RasterGrid.square(1.5, 256)
        sites = hex_sites(rings=1)
        est = site_density_limit(sites, grid, uniform_density(2.5), 0, [1.0, 0.5, 0.25])
        assert est.estimate == pytest.approx(2.5, rel=1e-12)
        assert len(est.history) == 3

    def test_smooth_density_converges_to_site_value(self):
        grid = RasterGrid.square(1.5, 512)
        sites = hex_sites(rings=1)
        rho = DensityField(uniform=1.0, blobs=(GaussianBlob(0.3, 0.2, 0.5, 3.0),))
        truth = float(rho.evaluate(0.0, 0.0))
        est = site_density_limit(sites, grid, rho, 0, [1.0, 0.5, 0.25, 0.125])
        assert est.estimate == pytest.approx(truth, rel=0.05)
        # refinement moves the estimate toward the point value
        errs = [abs(v - truth) for _, v in est.history]
        assert errs[-1] <= errs[0]

    def test_zero_density(self):
        grid = RasterGrid.square(1.5, 128)
        est = site_density_limit(hex_sites(rings=1), grid, uniform_density(0.0), 0, [1.0, 0.5])
        assert est.estimate == 0.0

    def test_resolution_exceeded(self):
        grid = RasterGrid.square(1.5, 64)
        with pytest.raises(ResolutionExceeded):
            site_density_limit(
                hex_sites(rings=1), grid, uniform_density(1.0), 0, [1.0, 0.01]
            )

    def test_sequence_validation(self):
        grid = RasterGrid.square(1.5, 64)
        with pytest.raises(ValueError):
            site_density_limit(hex_sites(rings=1), grid, uniform_density(1.0), 0, [])
        with pytest.raises(ValueError):
            site_density_limit(hex_sites(rings=1), grid, uniform_density(1.0), 0, [0.5, 0.5])


class TestDidDensityEstimate:
    def test_uniform_density_recovered(self):
        grid = RasterGrid.square(1.5, 512)
        est = did_density_estimate(
            hex_sites(rings=1), grid, uniform_density(4.0), 0, 1, 2, delta_phi=0.08
        )
        assert est.estimate == pytest.approx(4.0, rel=1e-9)
        assert est.sliver_cells >= 4

    def test_linear_density_at_vertex(self):
        sites = hex_sites(rings=1)
        grid = RasterGrid.square(1.5, 512)
        a, b, c = 0.8, -0.5, 3.0
        rho = _LinearDensity(a, b, c)
        est = did_density_estimate(sites, grid, rho, 0, 1, 2, delta_phi=0.08)
        truth = a * est.vertex_x + b * est.vertex_y + c
        assert est.estimate == pytest.approx(truth, rel=0.05)

    def test_zero_density(self):
        grid = RasterGrid.square(1.5, 512)
        est = did_density_estimate(
            hex_sites(rings=1), grid, uniform_density(0.0), 0, 1, 2, delta_phi=0.08
        )
        assert est.estimate == 0.0

    def test_non_adjacent_triple_rejected(self):
        # ring-2 cells never meet the center's region at a vertex
        sites = hex_sites(rings=2)
        grid = RasterGrid.square(2.5, 256)
        with pytest.raises(ValueError):
            did_density_estimate(sites, grid, uniform_density(1.0), 0, 1, 2, delta_phi=0.05)

    def test_sliver_resolution_guard(self):
        grid = RasterGrid.square(1.5, 64)
        with pytest.raises(ResolutionExceeded):
            did_density_estimate(
                hex_sites(rings=1), grid, uniform_density(1.0), 0, 1, 2, delta_phi=1e-5
            )

    def test_argument_validation(self):
        grid = RasterGrid.square(1.5, 64)
        with pytest.raises(ValueError):
            did_density_estimate(hex_sites(rings=1), grid, uniform_density(1.0), 0, 0, 2, 0.05)
        with pytest.raises(ValueError):
            did_density_estimate(hex_sites(rings=1), grid, uniform_density(1.0), 0, 1, 2, -0.1)


class _LinearDensity(DensityField):
    """rho = ax + by + c, for vertex-recovery oracles (positive on the bbox)."""

    def __init__(self, a, b, c):
        object.__setattr__(self, "uniform", 0.0)
        object.__setattr__(self, "blobs", ())
        object.__setattr__(self, "_abc", (a, b, c))

    def evaluate(self, x, y):
        a, b, c = self._abc
        return a * np.asarray(x, dtype=float) + b * np.asarray(y, dtype=float) + c


class TestPgmExport:
    def test_round_trip(self, tmp_path):
        sites = hex_sites(rings=1)
        grid = RasterGrid.square(1.5, 64)
        raster = assign_regions(sites, grid)
        path = tmp_path / "regions.pgm"
        write_raster_pgm(raster, sites, path)
        labels, (nx, ny) = read_raster_pgm(path)
        assert (nx, ny) == (64, 64)
        assert np.array_equal(labels, raster.labels.astype(np.uint8))
        sidecar = (tmp_path / "regions.pgm.txt").read_text()
        assert "resolution 64 64" in sidecar
        assert f"sites {len(sites)}" in sidecar
        assert sidecar.count("\nsite ") == len(sites)

    def test_too_many_sites_rejected(self, tmp_path):
        grid = RasterGrid.square(1.0, 32)
        labels = np.zeros((32, 32), dtype=np.int32)
        raster = LabeledRaster(labels=labels, grid=grid, n_sites=300)
        with pytest.raises(ValueError):
            write_raster_pgm(raster, [], tmp_path / "x.pgm")
