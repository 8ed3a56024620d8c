import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellwhatif import geometry as G

THETA60 = math.pi / 3
THETA90 = math.pi / 2


class TestBetaFromDelta:
    def test_identity_adjustment(self):
        assert G.beta_from_delta(G.AdjustmentDelta(0.0, 0.0)) == 1.0

    def test_minus_six_db(self):
        # direct evaluation of 10^(0.1 * -6)
        assert G.beta_from_delta(G.AdjustmentDelta(-6.0, 0.0)) == pytest.approx(
            0.251188643150958, rel=1e-12
        )

    def test_cancelling_deltas(self):
        assert G.beta_from_delta(G.AdjustmentDelta(3.0, -3.0)) == 1.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            G.AdjustmentDelta(math.nan, 0.0)
        with pytest.raises(ValueError):
            G.AdjustmentDelta(0.0, math.inf)


class TestApolloniusBoundary:
    def test_equal_power_gives_bisector(self):
        shape = G.apollonius_boundary(1.0, 500.0)
        assert shape == G.BisectorLine(x=250.0)

    def test_quarter_beta_closed_form(self):
        shape = G.apollonius_boundary(0.25, 1.0)
        assert isinstance(shape, G.ApolloniusCircle)
        assert shape.center_x == pytest.approx(-1.0 / 3.0, rel=1e-12)
        assert shape.radius == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_beta_four_center_flips_sign(self):
        shape = G.apollonius_boundary(4.0, 1.0)
        assert shape.center_x == pytest.approx(4.0 / 3.0, rel=1e-12)
        assert shape.radius == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_small_beta_center_negative(self):
        shape = G.apollonius_boundary(0.5, 2.0)
        assert shape.center_x < 0 < shape.radius

    def test_circle_points_satisfy_power_equality(self):
        # 360 sampled points per circle must satisfy
        # beta * ((x-R)^2 + y^2) = x^2 + y^2 to 1e-9 relative.
        rng = np.random.default_rng(2024)
        for _ in range(20):
            beta = float(rng.uniform(0.05, 20.0))
            if abs(beta - 1.0) < 1e-3:
                continue
            R = float(rng.uniform(10.0, 2000.0))
            c = G.apollonius_boundary(beta, R)
            ang = np.linspace(0.0, 2.0 * math.pi, 360, endpoint=False)
            x = c.center_x + c.radius * np.cos(ang)
            y = c.radius * np.sin(ang)
            lhs = beta * ((x - R) ** 2 + y**2)
            rhs = x**2 + y**2
            rel = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
            assert float(rel.max()) <= 1e-9

    def test_invalid_beta(self):
        with pytest.raises(ValueError):
            G.apollonius_boundary(0.0, 1.0)
        with pytest.raises(ValueError):
            G.apollonius_boundary(-2.0, 1.0)
        with pytest.raises(ValueError):
            G.apollonius_boundary(1.0, 0.0)


class TestGammaAngle:
    def test_near_unity_limit(self):
        assert G.gamma_angle(1.0 - 1e-12, THETA60) == pytest.approx(0.0, abs=1e-9)

    def test_half_beta_sixty_degrees(self):
        assert G.gamma_angle(0.5, THETA60) == pytest.approx(0.16223165169159098, rel=1e-12)

    def test_quarter_beta_ninety_degrees(self):
        assert G.gamma_angle(0.25, THETA90) == pytest.approx(0.4240310394907405, rel=1e-12)

    def test_monotone_decreasing_in_beta(self):
        betas = np.linspace(0.01, 0.99, 99)
        gammas = [G.gamma_angle(float(b), THETA60) for b in betas]
        assert all(a > b for a, b in zip(gammas, gammas[1:]))

    def test_range(self):
        for beta in (0.05, 0.3, 0.9):
            g = G.gamma_angle(beta, THETA90)
            assert 0.0 < g < THETA90 / 2.0

    def test_rejects_beta_outside_open_interval(self):
        for bad in (0.0, 1.0, 1.5, -0.2):
            with pytest.raises(ValueError):
                G.gamma_angle(bad, THETA60)


class TestAreaMultiplier:
    def test_unity_for_all_theta(self):
        for theta_deg in (10, 30, 60, 90, 120, 170):
            assert G.area_multiplier(1.0, math.radians(theta_deg)) == 1.0

    def test_half_beta_matches_monte_carlo(self):
        a = G.area_multiplier(0.5, THETA60)
        mc = G.mc_area_ratio(0.5, THETA60, 10**6, seed=7)
        assert a == pytest.approx(0.6653720116493849, rel=1e-12)
        assert abs(a - mc.estimate) <= max(0.01, 3.0 * mc.stderr)

    def test_reflection_of_half(self):
        assert G.area_multiplier(2.0, THETA60) == 2.0 - G.area_multiplier(0.5, THETA60)
        assert G.area_multiplier(2.0, THETA60) == pytest.approx(1.335, abs=0.01)

    @given(st.floats(min_value=0.02, max_value=50.0))
    @settings(max_examples=200, deadline=None)
    def test_reflection_identity_by_construction(self, beta):
        a = G.area_multiplier(beta, THETA60)
        b = G.area_multiplier(1.0 / beta, THETA60)
        if beta > 1.0:
            assert a == 2.0 - b
        elif beta < 1.0:
            assert b == 2.0 - a
        assert abs(a + b - 2.0) <= 4e-15

    def test_continuity_at_unity(self):
        for theta_deg in (30, 60, 90, 120):
            th = math.radians(theta_deg)
            assert abs(G.area_multiplier(1.0 + 1e-4, th) - 1.0) <= 1e-3
            assert abs(G.area_multiplier(1.0 - 1e-4, th) - 1.0) <= 1e-3

    def test_series_joins_raw_branch(self):
        # values straddling the series window edge must agree closely
        for theta_deg in (30, 60, 120):
            th = math.radians(theta_deg)
            lo = G.area_multiplier(1.0 - 1.0001e-2, th)
            hi = G.area_multiplier(1.0 - 0.9999e-2, th)
            assert abs(lo - hi) < 5e-6

    def test_monotone_on_grid(self):
        for theta_deg in (30, 60, 90, 120):
            th = math.radians(theta_deg)
            grid = np.linspace(0.05, 3.0, 100)
            vals = [G.area_multiplier(float(b), th) for b in grid]
            assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_range(self):
        for beta in (1e-4, 0.2, 0.999, 1.3, 50.0):
            a = G.area_multiplier(beta, THETA60)
            assert 0.0 < a < 2.0

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            G.area_multiplier(0.0, THETA60)
        with pytest.raises(ValueError):
            G.area_multiplier(0.5, 0.0)
        with pytest.raises(ValueError):
            G.area_multiplier(0.5, math.pi)


class TestShadedArea:
    def test_half_beta_value(self):
        # alpha(0.5, 60deg) * tan(30deg)/4
        assert G.shaded_area(0.5, THETA60, 1.0) == pytest.approx(
            0.09603817750925378, rel=1e-12
        )

    def test_matches_direct_closed_form(self):
        # independent oracle: (gamma - sqrt(beta) sin gamma) * beta R^2 / (1-beta)^2
        for beta in (0.1, 0.4, 0.8):
            g = G.gamma_angle(beta, THETA60)
            direct = (g - math.sqrt(beta) * math.sin(g)) * beta / (1.0 - beta) ** 2
            assert G.shaded_area(beta, THETA60, 1.0) == pytest.approx(direct, rel=1e-12)

    def test_quadratic_scaling_in_distance(self):
        a1 = G.shaded_area(0.5, THETA60, 1.0)
        a2 = G.shaded_area(0.5, THETA60, 2.0)
        assert a2 == pytest.approx(4.0 * a1, rel=1e-12)

    def test_limit_is_wedge_triangle(self):
        base = 0.25 * math.tan(THETA60 / 2.0)
        assert G.shaded_area(1.0 - 1e-7, THETA60, 1.0) == pytest.approx(base, rel=1e-5)

    def test_alpha_consistency(self):
        beta, R = 0.37, 123.0
        expected = G.area_multiplier(beta, THETA60) * 0.25 * R * R * math.tan(THETA60 / 2)
        assert G.shaded_area(beta, THETA60, R) == expected


class TestMonteCarlo:
    def test_full_wedge_at_unity(self):
        mc = G.mc_area_ratio(1.0, THETA60, 10**5, seed=7)
        assert mc.estimate == 1.0
        assert mc.stderr == 0.0

    def test_deterministic_given_seed(self):
        a = G.mc_area_ratio(0.5, THETA60, 10**5, seed=42)
        b = G.mc_area_ratio(0.5, THETA60, 10**5, seed=42)
        assert a == b

    def test_seed_changes_estimate(self):
        a = G.mc_area_ratio(0.5, THETA60, 10**5, seed=1)
        b = G.mc_area_ratio(0.5, THETA60, 10**5, seed=2)
        assert a.estimate != b.estimate

    def test_oracle_self_consistency(self):
        for beta, theta in ((0.5, THETA60), (0.25, THETA90)):
            mc = G.mc_area_ratio(beta, theta, 10**6, seed=7)
            assert abs(mc.estimate - G.area_multiplier(beta, theta)) <= max(
                0.01, 3.0 * mc.stderr
            )

    def test_zero_samples_rejected(self):
        with pytest.raises(ValueError):
            G.mc_area_ratio(0.5, THETA60, 0, seed=7)
        with pytest.raises(ValueError):
            G.mc_area_ratio(1.2, THETA60, 100, seed=7)


class TestBoundaryPolyline:
    def test_unity_polyline_is_hexagon(self):
        poly = G.boundary_polyline(1.0, THETA60, 1.0, 6, 65)
        assert np.allclose(poly[0], poly[-1])
        r = np.hypot(poly[:, 0], poly[:, 1])
        # vertices at R/sqrt(3), edge midpoints at R/2 (odd count hits both)
        assert r.max() == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-12)
        assert r.min() == pytest.approx(0.5, rel=1e-12)
        assert G.polygon_area(poly) == pytest.approx(math.sqrt(3.0) / 2.0, rel=1e-9)

    def test_shrunk_polyline_satisfies_power_equality(self):
        beta = 0.5
        poly = G.boundary_polyline(beta, THETA60, 1.0, 6, 64)[:-1]
        x, y = poly[:, 0], poly[:, 1]
        best = np.full(len(poly), np.inf)
        for i in range(6):
            nx, ny = math.cos(i * THETA60), math.sin(i * THETA60)
            lhs = beta * ((x - nx) ** 2 + (y - ny) ** 2)
            rhs = x**2 + y**2
            best = np.minimum(best, np.abs(lhs - rhs) / np.maximum(rhs, 1e-300))
        assert float(best.max()) <= 1e-6

    def test_vanishing_beta_collapses(self):
        poly = G.boundary_polyline(1e-8, THETA60, 1.0, 6, 16)
        assert float(np.hypot(poly[:, 0], poly[:, 1]).max()) < 1e-3

    def test_expanded_reaches_beyond_bisector(self):
        poly = G.boundary_polyline(2.0, THETA60, 1.0, 6, 64)
        r = np.hypot(poly[:, 0], poly[:, 1])
        assert r.min() > 0.5

    def test_escape_regime_rejected(self):
        assert G.escapes_wedge(4.1, THETA60)
        assert not G.escapes_wedge(3.9, THETA60)
        assert not G.escapes_wedge(0.1, THETA60)
        with pytest.raises(ValueError):
            G.boundary_polyline(4.5, THETA60, 1.0, 6, 64)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            G.boundary_polyline(0.5, THETA60, 1.0, 2, 64)
        with pytest.raises(ValueError):
            G.boundary_polyline(0.5, THETA60, 1.0, 6, 4)


class TestReflectionRuleGap:
    def test_shrink_side_matches(self):
        alpha, true_ratio = G.reflection_rule_gap(0.5, THETA60)
        assert true_ratio == pytest.approx(alpha, rel=1e-6)

    def test_expansion_side_underestimates(self):
        # the documented divergence of the beta > 1 simplification
        alpha, true_ratio = G.reflection_rule_gap(10**0.6, THETA60)
        assert true_ratio > alpha * 1.25
