import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gexpect import testfuncs as tf
from gexpect.maximal import (
    MaximalDist,
    VarianceBand,
    lower_expectation,
    maximal_expectation,
    pushforward,
)

UNIT = MaximalDist.from_intervals([(1.0, 2.0)])
SQUARE = MaximalDist.from_intervals([(1.0, 2.0), (1.0, 2.0)])


def test_band_validation():
    with pytest.raises(ValueError):
        VarianceBand(2.0, 1.0)
    with pytest.raises(ValueError):
        VarianceBand(-0.5, 1.0)


def test_monotone_function_hits_upper_end():
    value, arg = maximal_expectation(UNIT, tf.polynomial([0, 1]))
    assert value == pytest.approx(2.0, abs=1e-12)
    assert arg[0] == pytest.approx(2.0, abs=1e-9)


def test_cubic_on_interval():
    value, _ = maximal_expectation(UNIT, tf.polynomial([0, 0, 0, 1]))
    assert value == pytest.approx(8.0, abs=1e-10)


def test_interior_maximum_found_by_refinement():
    # maximiser (1.5, 1.3) is off the default grid in the second coordinate
    class Peak:
        arity = 2
        growth_order = 2
        convexity = tf.CONCAVE

        def __call__(self, u, v):
            return -((u - 1.5) ** 2) - (v - 1.3) ** 2

    value, arg = maximal_expectation(SQUARE, Peak())
    # dense-grid oracle: the best value on a 2001^2 lattice is strictly worse
    axis = np.linspace(1.0, 2.0, 2001)
    uu, vv = np.meshgrid(axis, axis, indexing="ij")
    oracle = np.max(-((uu - 1.5) ** 2) - (vv - 1.3) ** 2)
    assert value >= oracle - 1e-15
    assert value == pytest.approx(0.0, abs=1e-8)
    np.testing.assert_allclose(arg, [1.5, 1.3], atol=1e-6)


def test_lower_expectation_examples():
    assert lower_expectation(UNIT, tf.polynomial([0, 1]))[0] == pytest.approx(1.0, abs=1e-12)
    assert lower_expectation(UNIT, tf.polynomial([0, 0, 1]))[0] == pytest.approx(1.0, abs=1e-10)
    half = MaximalDist.from_intervals([(0.0, 1.0)])
    shifted = tf.polynomial([0.25, -1.0, 1.0])  # (v - 0.5)^2
    assert lower_expectation(half, shifted)[0] == pytest.approx(0.0, abs=1e-10)


def test_duality_is_exact():
    phi = tf.polynomial([0.3, -1.0, 0.0, 2.0])
    upper, _ = maximal_expectation(UNIT, tf.NegatedFunction(phi))
    lower, _ = lower_expectation(UNIT, phi)
    assert lower == -upper


def test_degenerate_interval_returns_point_value():
    point = MaximalDist.from_intervals([(1.3, 1.3)])
    phi = tf.polynomial([1.0, 2.0, -0.5])
    value, arg = maximal_expectation(point, phi)
    assert value == tf.evaluate(phi, [1.3])
    assert arg[0] == 1.3


class TestOrderIrrelevance:
    """Iterated maxima agree in either coordinate order on a rectangle."""

    RECT = MaximalDist.from_intervals([(0.5, 1.5), (1.0, 2.0)])

    @pytest.mark.parametrize(
        "phi",
        [
            tf.monomial([1, 2]),
            tf.power_of_sum([1.0, -2.0], 3),
            tf.power_of_sum([1.0, 1.0], 2),
        ],
        ids=["monomial", "odd-power", "square"],
    )
    def test_iterated_max_orders(self, phi):
        joint, _ = maximal_expectation(self.RECT, phi)

        def iterated(first_axis):
            (a1, b1), (a2, b2) = self.RECT.support
            outer = np.linspace(*(self.RECT.support[first_axis]), 601)
            inner = np.linspace(*(self.RECT.support[1 - first_axis]), 601)
            best = -math.inf
            for u in outer:
                args = (u, inner) if first_axis == 0 else (inner, u)
                best = max(best, float(np.max(phi(*args))))
            return best

        assert joint == pytest.approx(iterated(0), abs=1e-10)
        assert joint == pytest.approx(iterated(1), abs=1e-10)


class TestPushforward:
    def test_square_of_interval(self):
        image = pushforward(UNIT, tf.polynomial([0, 0, 1]))
        np.testing.assert_allclose(image.support[0], (1.0, 4.0), atol=1e-10)

    def test_square_of_symmetric_interval(self):
        sym = MaximalDist.from_intervals([(-1.0, 1.0)])
        image = pushforward(sym, tf.polynomial([0, 0, 1]))
        np.testing.assert_allclose(image.support[0], (0.0, 1.0), atol=1e-10)

    def test_euclidean_norm_of_square(self):
        class Norm:
            arity = 2
            growth_order = 1
            convexity = tf.CONVEX

            def __call__(self, u, v):
                return np.sqrt(u**2 + v**2)

        image = pushforward(SQUARE, Norm())
        np.testing.assert_allclose(
            image.support[0], (math.sqrt(2.0), 2.0 * math.sqrt(2.0)), atol=1e-9
        )

    def test_image_supports_consistent_expectation(self):
        image = pushforward(UNIT, tf.polynomial([0, 0, 1]))
        value, _ = maximal_expectation(image, tf.polynomial([0, 1]))
        assert value == pytest.approx(4.0, abs=1e-9)


@given(
    lo=st.floats(min_value=0.0, max_value=3.0),
    width=st.floats(min_value=0.0, max_value=2.0),
    c1=st.floats(min_value=-2.0, max_value=2.0),
    c2=st.floats(min_value=-2.0, max_value=2.0),
)
@settings(max_examples=60, deadline=None)
def test_duality_property(lo, width, c1, c2):
    dist = MaximalDist.from_intervals([(lo, lo + width)])
    phi = tf.polynomial([0.0, c1, c2])
    upper, _ = maximal_expectation(dist, phi)
    lower, _ = lower_expectation(dist, phi)
    assert lower <= upper + 1e-12
