import math

import numpy as np
import pytest

from gexpect import testfuncs as tf
from gexpect.gheat import PdeConfig, convexity_collapse_check, solve_gheat, value_at_origin
from gexpect.maximal import VarianceBand
from gexpect.quadrature import normal_expectation

BAND_HALF = VarianceBand(0.5, 1.0)
BAND = VarianceBand(1.0, 2.0)


class TestScheme:
    def test_square_collapses_to_top_variance(self):
        value = value_at_origin(
            tf.polynomial([0, 0, 1], convexity=tf.CONVEX), PdeConfig.for_band(BAND_HALF)
        )
        assert value == pytest.approx(1.0, abs=5e-3)

    def test_negative_square_collapses_to_bottom(self):
        value = value_at_origin(
            tf.polynomial([0, 0, -1], convexity=tf.CONCAVE), PdeConfig.for_band(BAND_HALF)
        )
        assert value == pytest.approx(-0.25, abs=5e-3)

    def test_cubic_value_is_strictly_positive(self):
        value = value_at_origin(tf.polynomial([0, 0, 0, 1]), PdeConfig.for_band(BAND_HALF))
        assert value > 0.1

    def test_cfl_violation_reports_stable_limit(self):
        config = PdeConfig(band=BAND, x_halfwidth=8.0, dx=0.05, dt=0.01)
        with pytest.raises(ValueError, match="stable"):
            solve_gheat(tf.call(0.0), config)

    def test_degenerate_band_matches_classical_heat(self):
        band = VarianceBand(0.8, 0.8)
        value = value_at_origin(tf.call(0.2), PdeConfig.for_band(band))
        assert value == pytest.approx(normal_expectation(tf.call(0.2), 0.0, 0.8), abs=2e-3)


class TestCollapseCheck:
    def test_call_matches_top_heat(self):
        report = convexity_collapse_check(tf.call(0.0), PdeConfig.for_band(BAND))
        assert report.sigma_used == 2.0
        assert report.max_deviation <= 5e-3

    def test_concave_matches_bottom_heat(self):
        phi = tf.polynomial([0, 0, -1], convexity=tf.CONCAVE)
        report = convexity_collapse_check(phi, PdeConfig.for_band(BAND))
        assert report.sigma_used == 1.0
        assert report.max_deviation <= 5e-3

    def test_degenerate_band_is_tight(self):
        band = VarianceBand(1.1, 1.1)
        report = convexity_collapse_check(tf.call(0.4), PdeConfig.for_band(band))
        assert report.max_deviation <= 2e-3

    def test_untagged_nondegenerate_is_rejected(self):
        with pytest.raises(ValueError):
            convexity_collapse_check(tf.polynomial([0, 0, 0, 1]), PdeConfig.for_band(BAND))


class TestComparisonPrinciple:
    def test_dominates_every_fixed_volatility(self):
        phi = tf.call(0.3)
        config = PdeConfig.for_band(BAND_HALF)
        slice_ = solve_gheat(phi, config)
        x = slice_.grid
        mask = np.abs(x) <= 0.5 * config.x_halfwidth
        for sigma in (0.5, 0.75, 1.0):
            classical = np.array([normal_expectation(phi, xi, sigma) for xi in x[mask]])
            assert np.min(slice_.values[mask] - classical) >= -5e-3


class TestRefinementAndSymmetry:
    def test_halving_dx_cuts_the_change(self):
        phi = tf.polynomial([0, 0, 0, 1])
        values = []
        for points in (201, 401, 801):
            values.append(value_at_origin(phi, PdeConfig.for_band(BAND_HALF, points=points)))
        change_coarse = abs(values[1] - values[0])
        change_fine = abs(values[2] - values[1])
        assert change_fine <= 0.5 * change_coarse

    def test_mirror_symmetry_of_odd_initial_data(self):
        phi = tf.polynomial([0, 1, 0, 0.5])
        config = PdeConfig.for_band(BAND, points=801)
        direct = solve_gheat(phi, config)

        class Reflected:
            arity = 1
            growth_order = 3
            convexity = tf.UNKNOWN

            def __call__(self, x):
                return phi(-x)

        mirrored = solve_gheat(Reflected(), config)
        np.testing.assert_allclose(direct.values, mirrored.values[::-1], atol=1e-8)


def test_resolve_steps_divides_horizon():
    config = PdeConfig.for_band(BAND, t_final=1.0)
    dt, n_steps = config.resolve_steps()
    assert n_steps * dt == pytest.approx(1.0, abs=1e-12)
