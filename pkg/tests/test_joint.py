import math

import numpy as np
import pytest

from gexpect import testfuncs as tf
from gexpect.joint import (
    FULLY_SEQUENTIAL,
    SEMI_SEQUENTIAL,
    SEQUENTIAL,
    SkeletonSet,
    joint_expectation,
    monomial_sequential_moment,
    normalized_sum_expectation,
    skeleton_expectation,
    symmetry_check,
)
from gexpect.maximal import VarianceBand
from gexpect.semignormal import (
    SemiGNormal,
    moment_oracle_even,
    moment_oracle_odd,
    product_moment_oracle,
    upper_expectation,
)

BAND = VarianceBand(1.0, 2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
SUM_CUBE = tf.power_of_sum([1.0, 1.0], 3)


class TestModes:
    def test_semiseq_third_moment_vanishes(self):
        assert abs(joint_expectation(SUM_CUBE, BAND, SEMI_SEQUENTIAL)) <= 1e-9

    def test_sequential_third_moment(self):
        value = joint_expectation(SUM_CUBE, BAND, SEQUENTIAL)
        assert value == pytest.approx(18.0 / SQRT_2PI, abs=1e-6)

    def test_fully_sequential_matches_sequential(self):
        seq = joint_expectation(SUM_CUBE, BAND, SEQUENTIAL)
        full = joint_expectation(SUM_CUBE, BAND, FULLY_SEQUENTIAL)
        assert seq == full

    def test_asymmetry_pair(self):
        forward = joint_expectation(tf.monomial([1, 2]), BAND, SEQUENTIAL)
        mirrored = joint_expectation(tf.monomial([2, 1]), BAND, SEQUENTIAL)
        assert forward == pytest.approx(product_moment_oracle(BAND), abs=1e-6)
        assert abs(mirrored) <= 1e-6

    def test_mode_dominance(self):
        for phi in (SUM_CUBE, tf.monomial([1, 2]), tf.power_of_sum([0.8, 0.6], 4)):
            semi = joint_expectation(phi, BAND, SEMI_SEQUENTIAL)
            seq = joint_expectation(phi, BAND, SEQUENTIAL)
            assert seq >= semi - 1e-9

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            joint_expectation(SUM_CUBE, BAND, "pairwise")


class TestRoutes:
    def test_routes_agree_on_bivariate_cases(self):
        for phi in (tf.monomial([1, 2]), tf.monomial([2, 2]), SUM_CUBE):
            nested = joint_expectation(phi, BAND, SEQUENTIAL, method="nested")
            default = joint_expectation(phi, BAND, SEQUENTIAL)
            assert nested == pytest.approx(default, abs=1e-8)

    def test_closed_route_requires_monomials(self):
        with pytest.raises(ValueError):
            joint_expectation(SUM_CUBE, BAND, SEQUENTIAL, method="closed")

    def test_gem_route_requires_power_of_sum(self):
        with pytest.raises(ValueError):
            joint_expectation(tf.monomial([1, 2]), BAND, SEQUENTIAL, method="gem")

    def test_general_high_arity_unsupported(self):
        class FourArgs:
            arity = 4
            growth_order = 2
            convexity = tf.UNKNOWN

            def __call__(self, *args):
                return sum(args)

        with pytest.raises(NotImplementedError, match="n <= 3"):
            joint_expectation(FourArgs(), BAND, SEQUENTIAL)

    def test_semiseq_dimension_cap(self):
        class SevenArgs:
            arity = 7
            growth_order = 1
            convexity = tf.UNKNOWN

            def __call__(self, *args):
                return sum(args)

        with pytest.raises(NotImplementedError, match="n <= 6"):
            joint_expectation(SevenArgs(), BAND, SEMI_SEQUENTIAL)

    def test_monomial_recursion_any_arity(self):
        # odd power anywhere kills the moment
        assert monomial_sequential_moment([2, 3, 2], 1.0, BAND) == 0.0
        # all even: the top of the band everywhere
        value = monomial_sequential_moment([2, 2, 2], 1.0, BAND)
        assert value == pytest.approx(BAND.sigma_hi**6, abs=1e-12)
        # scale signs flip the optimal corner
        plus = monomial_sequential_moment([2, 2], 1.0, BAND)
        minus = monomial_sequential_moment([2, 2], -1.0, BAND)
        assert plus == pytest.approx(16.0)
        assert minus == pytest.approx(-1.0)  # -sigma_lo^4

    def test_nested_three_variable_sanity(self):
        # convex collapse: E[(W1+W2+W3)^2] = 3 sigma_hi^2; tabulated inner
        # stage costs about 1e-3 of accuracy
        phi = tf.power_of_sum([1.0, 1.0, 1.0], 2)
        value = joint_expectation(phi, BAND, SEQUENTIAL, method="nested")
        assert value == pytest.approx(3 * BAND.sigma_hi**2, abs=5e-3)
        odd = tf.monomial([1, 1, 1])
        assert abs(joint_expectation(odd, BAND, SEQUENTIAL, method="nested")) <= 1e-3


class TestClosedFormAgreement:
    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_sum_powers_match_oracles(self, n):
        value = joint_expectation(tf.power_of_sum([1.0, 1.0], n), BAND, SEQUENTIAL)
        oracle = moment_oracle_even(BAND, n) if n % 2 == 0 else moment_oracle_odd(BAND, n)
        assert value == pytest.approx(oracle, abs=1e-6)


class TestSkeleton:
    def test_l2_reaches_the_sequential_value(self):
        value, best = skeleton_expectation(SUM_CUBE, SkeletonSet("L2", BAND))
        assert value == pytest.approx(18.0 / SQRT_2PI, abs=1e-9)
        # the best policy starts at the top of the band and switches the
        # second volatility on the sign of the first outcome
        s1, s21, s22 = SkeletonSet("L2", BAND).policies()[best]
        assert (s1, s21, s22) == (2.0, 1.0, 2.0)

    def test_s2_has_no_feedback(self):
        value, _ = skeleton_expectation(SUM_CUBE, SkeletonSet("S2", BAND))
        assert abs(value) <= 1e-9

    def test_convex_square_collapses_for_both_families(self):
        square = tf.power_of_sum([1.0, 1.0], 2, convexity=tf.CONVEX)
        v_l2, _ = skeleton_expectation(square, SkeletonSet("L2", BAND))
        v_s2, _ = skeleton_expectation(square, SkeletonSet("S2", BAND))
        assert v_l2 == pytest.approx(8.0, abs=1e-9)
        assert v_s2 == pytest.approx(8.0, abs=1e-9)

    def test_out_of_family_rejected(self):
        with pytest.raises(ValueError):
            skeleton_expectation(tf.call(0.0), SkeletonSet("L2", BAND))
        with pytest.raises(ValueError):
            SkeletonSet("L3", BAND)


class TestSymmetryCheck:
    def test_semiseq_orders_agree_and_sequential_differ(self):
        report = symmetry_check(tf.monomial([1, 2]), BAND)
        assert report.semiseq_gap <= 1e-10
        assert report.sequential == pytest.approx(product_moment_oracle(BAND), abs=1e-6)
        assert abs(report.sequential_swapped) <= 1e-6

    def test_convex_function_symmetric_in_all_modes(self):
        report = symmetry_check(tf.power_of_sum([1.0, 1.0], 2, convexity=tf.CONVEX), BAND)
        assert report.semiseq_gap <= 1e-10
        assert report.sequential_gap <= 1e-8


class TestNormalizedSums:
    def test_semiseq_is_n_independent(self):
        phi = tf.polynomial([0, 0, 0, 1])
        for n in (1, 3, 10, 100):
            assert abs(normalized_sum_expectation(phi, BAND, n, SEMI_SEQUENTIAL)) <= 1e-10

    def test_modes_coincide_at_n_one(self):
        phi = tf.call(0.4)
        semi = normalized_sum_expectation(phi, BAND, 1, SEMI_SEQUENTIAL)
        seq = normalized_sum_expectation(phi, BAND, 1, SEQUENTIAL)
        assert semi == pytest.approx(seq, abs=1e-10)

    def test_semiseq_equals_single_variable_value(self):
        phi = tf.call(0.4)
        direct, _ = upper_expectation(SemiGNormal(BAND), phi)
        assert normalized_sum_expectation(phi, BAND, 7, SEMI_SEQUENTIAL) == pytest.approx(direct)
