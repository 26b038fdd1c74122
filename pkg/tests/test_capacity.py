import math

import numpy as np
import pytest

from gexpect.capacity import (
    CapacityCurve,
    ConfidenceQuery,
    capacity_curve,
    classical_critical_value,
    coverage_simulation,
    lower_cdf,
    robust_critical_value,
    upper_cdf,
    weighted_sum_capacity,
)
from gexpect.maximal import VarianceBand
from gexpect.quadrature import RngStream, std_normal_cdf
from gexpect.semignormal import SemiGNormal

BAND = VarianceBand(1.0, 2.0)
DIST = SemiGNormal(BAND)


class TestClosedFormCdf:
    def test_symmetric_midpoint(self):
        assert upper_cdf(DIST, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_positive_threshold_uses_band_bottom(self):
        assert upper_cdf(DIST, 1.0) == pytest.approx(float(std_normal_cdf(1.0)), abs=1e-12)

    def test_negative_threshold_uses_band_top(self):
        assert upper_cdf(DIST, -1.0) == pytest.approx(float(std_normal_cdf(-0.5)), abs=1e-12)

    def test_monotone_in_threshold(self):
        ys = np.linspace(-4, 4, 101)
        uppers = [upper_cdf(DIST, y) for y in ys]
        lowers = [lower_cdf(DIST, y) for y in ys]
        assert np.all(np.diff(uppers) >= 0)
        assert np.all(np.diff(lowers) >= 0)
        assert np.all(np.asarray(uppers) >= np.asarray(lowers))

    def test_band_touching_zero_contains_point_mass(self):
        dist = SemiGNormal(VarianceBand(0.0, 1.0))
        assert upper_cdf(dist, 0.0) == 1.0
        assert upper_cdf(dist, 0.5) == 1.0
        assert upper_cdf(dist, -0.5) == pytest.approx(float(std_normal_cdf(-0.5)))
        assert lower_cdf(dist, -0.5) == 0.0

    def test_curve_invariants(self):
        curve = capacity_curve(DIST, np.linspace(-3, 3, 25))
        assert all(u >= l for u, l in zip(curve.upper, curve.lower))
        assert list(curve.thresholds) == sorted(curve.thresholds)

    def test_curve_rejects_crossed_bounds(self):
        with pytest.raises(ValueError):
            CapacityCurve(thresholds=(0.0,), upper=(0.2,), lower=(0.4,))


class TestQuery:
    def test_design_weights(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        query = ConfidenceQuery.from_design(x, BAND, alpha=0.05)
        centred = x - x.mean()
        np.testing.assert_allclose(query.weights, centred / (centred @ centred))

    def test_validation(self):
        with pytest.raises(ValueError):
            ConfidenceQuery(weights=(0.0, 0.0), band=BAND, alpha=0.05)
        with pytest.raises(ValueError):
            ConfidenceQuery(weights=(1.0,), band=BAND, alpha=1.5)
        with pytest.raises(ValueError):
            ConfidenceQuery(weights=(1.0,), band=BAND, alpha=0.05, family="Q")

    def test_family_spellings(self):
        for name in ("S", "Sn", "s_n"):
            assert ConfidenceQuery(weights=(1.0,), band=BAND, alpha=0.1, family=name).family == "S"


class TestWeightedSumCapacity:
    def test_constant_family_closed_form(self):
        query = ConfidenceQuery(weights=(1.0,), band=BAND, alpha=0.05, family="S")
        est = weighted_sum_capacity(query, 4.0)
        assert est.value == pytest.approx(2 * (1 - float(std_normal_cdf(2.0))), abs=1e-14)
        assert est.inner == est.outer == est.value

    def test_single_step_feedback_brackets_constant_family(self):
        query = ConfidenceQuery(weights=(1.0,), band=BAND, alpha=0.05, family="L")
        exact = 2 * (1 - float(std_normal_cdf(2.0)))
        for delta in (0.04, 0.02):
            est = weighted_sum_capacity(query, 4.0, delta=delta)
            assert est.inner <= exact <= est.outer
        tight = weighted_sum_capacity(query, 4.0, delta=0.02)
        loose = weighted_sum_capacity(query, 4.0, delta=0.04)
        assert tight.outer - tight.inner <= loose.outer - loose.inner

    def test_monotone_in_threshold(self):
        query = ConfidenceQuery(weights=(0.6, 0.8), band=BAND, alpha=0.05, family="L")
        values = [weighted_sum_capacity(query, c).value for c in (1.0, 2.0, 4.0)]
        assert values[0] >= values[1] >= values[2]

    def test_feedback_family_dominates_constant_family(self):
        weights = (0.5, 0.5)
        for c in (0.6, 1.2, 2.4):
            v_s = weighted_sum_capacity(
                ConfidenceQuery(weights=weights, band=BAND, alpha=0.05, family="S"), c
            ).value
            v_l = weighted_sum_capacity(
                ConfidenceQuery(weights=weights, band=BAND, alpha=0.05, family="L"), c
            ).inner
            assert v_l >= v_s - 5e-3  # smoothing slack on the feedback side

    def test_nonpositive_threshold_rejected(self):
        query = ConfidenceQuery(weights=(1.0,), band=BAND, alpha=0.05, family="S")
        with pytest.raises(ValueError):
            weighted_sum_capacity(query, 0.0)


class TestCriticalValue:
    def test_degenerate_band_recovers_classical_interval(self):
        band = VarianceBand(1.5, 1.5)
        query = ConfidenceQuery(weights=(0.3, -0.4), band=band, alpha=0.05, family="S")
        cv = robust_critical_value(query)
        assert cv.c == pytest.approx(classical_critical_value(query, 1.5), rel=1e-3)

    def test_constant_family_worst_case_is_band_top(self):
        query = ConfidenceQuery(weights=(0.3, -0.4), band=BAND, alpha=0.05, family="S")
        cv = robust_critical_value(query)
        assert cv.c == pytest.approx(classical_critical_value(query, BAND.sigma_hi), rel=1e-3)

    def test_feedback_family_needs_wider_interval(self):
        weights = tuple(np.full(4, 0.5))
        c_s = robust_critical_value(
            ConfidenceQuery(weights=weights, band=BAND, alpha=0.05, family="S")
        ).c
        c_l = robust_critical_value(
            ConfidenceQuery(weights=weights, band=BAND, alpha=0.05, family="L")
        ).c
        assert c_l >= c_s - 1e-9

    def test_monotone_in_confidence_level(self):
        query_lo = ConfidenceQuery(weights=(1.0,), band=BAND, alpha=0.10, family="S")
        query_hi = ConfidenceQuery(weights=(1.0,), band=BAND, alpha=0.02, family="S")
        assert robust_critical_value(query_hi).c >= robust_critical_value(query_lo).c

    def test_alpha_range_guard(self):
        with pytest.raises(ValueError):
            robust_critical_value(
                ConfidenceQuery(weights=(1.0,), band=BAND, alpha=0.7, family="S")
            )


class TestCoverageSimulation:
    def test_common_random_numbers_are_reproducible(self):
        query = ConfidenceQuery(weights=(0.5, 0.5, 0.5), band=BAND, alpha=0.05, family="S")
        rows_a = coverage_simulation(query, 2.0, policies=("const-hi",), reps=20_000,
                                     rng=RngStream(1))
        rows_b = coverage_simulation(query, 2.0, policies=("const-hi",), reps=20_000,
                                     rng=RngStream(1))
        assert rows_a[0].coverage == rows_b[0].coverage

    def test_lower_volatility_covers_more(self):
        query = ConfidenceQuery(weights=(0.5, 0.5, 0.5), band=BAND, alpha=0.05, family="S")
        rows = coverage_simulation(query, 2.0, policies=("const-lo", "const-hi"), reps=50_000,
                                   rng=RngStream(2))
        assert rows[0].coverage > rows[1].coverage

    def test_replay_requires_policy(self):
        query = ConfidenceQuery(weights=(0.5, 0.5), band=BAND, alpha=0.05, family="L")
        with pytest.raises(ValueError):
            coverage_simulation(query, 1.0, policies=("dp-replay",), reps=100, rng=RngStream(0))

    def test_unknown_policy_rejected(self):
        query = ConfidenceQuery(weights=(1.0,), band=BAND, alpha=0.05, family="S")
        with pytest.raises(ValueError):
            coverage_simulation(query, 1.0, policies=("martingale",), reps=100, rng=RngStream(0))
