"""Verification suite: every release-gating check in one registry.

Each criterion pins its tolerance from :mod:`gexpect.config` and compares
an implementation route against an independent reference (closed form,
enumeration, finite differences or Monte Carlo).  The CLI ``verify`` verb
and the pytest suite both run this registry, printing one line per
criterion.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import testfuncs as tf
from .capacity import (
    ConfidenceQuery,
    classical_critical_value,
    coverage_simulation,
    robust_critical_value,
    upper_cdf,
    weighted_sum_capacity,
)
from .cltcheck import max_mean_demo
from .config import TOLERANCES
from .gheat import PdeConfig, value_at_origin
from .griddp import IterationSchedule, gnormal_expectation_iterative
from .joint import (
    SEMI_SEQUENTIAL,
    SEQUENTIAL,
    SkeletonSet,
    joint_expectation,
    normalized_sum_expectation,
    skeleton_expectation,
    symmetry_check,
)
from .maximal import VarianceBand
from .quadrature import RngStream, std_normal_cdf
from .semignormal import (
    SemiGNormal,
    moment_oracle_even,
    moment_oracle_odd,
    product_moment_oracle,
    reversed_product_mean,
    upper_expectation,
)

BAND_12 = VarianceBand(1.0, 2.0)
BAND_HALF = VarianceBand(0.5, 1.0)


@dataclass
class CriterionResult:
    cid: int
    description: str
    passed: bool
    detail: str
    seconds: float


def _sum_power(k):
    return tf.power_of_sum([1.0, 1.0], k)


def _cubic():
    return tf.polynomial([0.0, 0.0, 0.0, 1.0])


def check_sequential_third_moment():
    """Sequential (W1+W2)^3 equals its closed form."""
    tol = TOLERANCES["moment_closed_form"]
    expected = 3.0 * (4.0 - 1.0) * 2.0 / math.sqrt(2.0 * math.pi)
    value = joint_expectation(_sum_power(3), BAND_12, SEQUENTIAL)
    err = abs(value - expected)
    return err <= tol, f"value={value:.9f} expected={expected:.9f} err={err:.2e} tol={tol:g}"


def check_semiseq_third_moment_zero():
    """Semi-sequential (W1+W2)^3 vanishes."""
    tol = TOLERANCES["semiseq_zero"]
    value = joint_expectation(_sum_power(3), BAND_12, SEMI_SEQUENTIAL)
    return abs(value) <= tol, f"|value|={abs(value):.2e} tol={tol:g}"


def check_even_moments():
    """Sequential (W1+W2)^n matches (n-1)!! sigma_hi^n 2^(n/2) for n in {2, 4}."""
    tol = TOLERANCES["even_moment_rel"]
    worst = 0.0
    for n in (2, 4):
        value = joint_expectation(_sum_power(n), BAND_12, SEQUENTIAL)
        oracle = moment_oracle_even(BAND_12, n)
        worst = max(worst, abs(value - oracle) / abs(oracle))
    return worst <= tol, f"worst rel err={worst:.2e} tol={tol:g}"


def check_odd_moment_dp():
    """Fifth moment through the recursion matches the closed form."""
    tol = TOLERANCES["moment_closed_form"]
    value = joint_expectation(_sum_power(5), BAND_12, SEQUENTIAL)
    oracle = moment_oracle_odd(BAND_12, 5)
    err = abs(value - oracle)
    return err <= tol, f"value={value:.6f} oracle={oracle:.6f} err={err:.2e} tol={tol:g}"


def check_asymmetry_pair():
    """E_upper[W1 W2^2] is positive-closed-form while E_upper[W1^2 W2] = 0."""
    tol = TOLERANCES["moment_closed_form"]
    forward = joint_expectation(tf.monomial([1, 2]), BAND_12, SEQUENTIAL, method="nested")
    mirrored = joint_expectation(tf.monomial([2, 1]), BAND_12, SEQUENTIAL, method="nested")
    expected = product_moment_oracle(BAND_12)
    err1, err2 = abs(forward - expected), abs(mirrored)
    ok = err1 <= tol and err2 <= tol
    return ok, f"W1W2^2 err={err1:.2e}, W1^2W2={mirrored:.2e}, tol={tol:g}"


def check_convex_concave_collapse():
    """Convex/concave payoffs collapse across modes to the band shortcut."""
    tol = TOLERANCES["mode_collapse"]
    cases = [
        tf.polynomial([0.0, 0.0, 1.0], convexity=tf.CONVEX),
        tf.polynomial([0.0, 0.0, -1.0], convexity=tf.CONCAVE),
        tf.call(0.0),
        tf.call(0.7),
    ]
    worst = 0.0
    for phi in cases:
        shortcut, _ = upper_expectation(SemiGNormal(BAND_12), phi)
        semi = normalized_sum_expectation(phi, BAND_12, 2, SEMI_SEQUENTIAL)
        seq = normalized_sum_expectation(phi, BAND_12, 2, SEQUENTIAL)
        worst = max(worst, abs(semi - shortcut), abs(seq - shortcut))
    return worst <= tol, f"worst gap={worst:.2e} tol={tol:g}"


def check_skeleton_equals_dp():
    """Eight-policy enumeration equals nested recursion for small monomials."""
    tol = TOLERANCES["skeleton_vs_dp"]
    skeleton = SkeletonSet("L2", BAND_12)
    worst = 0.0
    for p in range(0, 6):
        for q in range(0, 6):
            if not 1 <= p + q <= 5:
                continue
            phi = tf.monomial([p, q])
            enum_value, _ = skeleton_expectation(phi, skeleton)
            dp_value = joint_expectation(phi, BAND_12, SEQUENTIAL, method="nested")
            worst = max(worst, abs(enum_value - dp_value))
    return worst <= tol, f"worst gap={worst:.2e} tol={tol:g}"


def check_iterative_vs_pde():
    """Cubic payoff: recursion converges to the finite-difference value."""
    tol = TOLERANCES["dp_vs_pde"]
    slack = TOLERANCES["decay_slack"]
    pde = value_at_origin(_cubic(), PdeConfig.for_band(BAND_HALF))
    errors = []
    for n in (10, 40, 160):
        value = gnormal_expectation_iterative(
            _cubic(), BAND_HALF, IterationSchedule(n_steps=n)
        ).value
        errors.append(abs(value - pde))
    decaying = all(errors[i + 1] <= errors[i] * slack for i in range(len(errors) - 1))
    ok = errors[-1] <= tol and decaying
    detail = ", ".join(f"n={n}: {e:.2e}" for n, e in zip((10, 40, 160), errors))
    return ok, f"{detail}; final tol={tol:g}, decay ok={decaying}"


def check_dominance():
    """Iterative value dominates the one-step band value; strictly for x^3."""
    tol = TOLERANCES["dominance"]
    strict = TOLERANCES["dominance_strict"]
    phis = [
        tf.polynomial([0.0, 1.0]),
        tf.polynomial([0.0, 0.0, 1.0], convexity=tf.CONVEX),
        tf.polynomial([0.0, 0.0, -1.0], convexity=tf.CONCAVE),
        _cubic(),
        tf.polynomial([0.0, 0.0, 0.0, 0.0, 1.0], convexity=tf.CONVEX),
        tf.call(0.0),
        tf.call(0.7),
        tf.put(0.5),
        tf.abs_power(1.0),
        tf.indicator_above(0.5, 0.2),
    ]
    worst_gap = math.inf
    cubic_gap = None
    for phi in phis:
        semi, _ = upper_expectation(SemiGNormal(BAND_HALF), phi)
        iterative = gnormal_expectation_iterative(
            phi, BAND_HALF, IterationSchedule(n_steps=16, grid_points=2049)
        ).value
        gap = iterative - semi
        worst_gap = min(worst_gap, gap)
        if phi.variant == tf.POLYNOMIAL and phi.param_dict["coefficients"] == (0.0, 0.0, 0.0, 1.0):
            cubic_gap = gap
    ok = worst_gap >= -tol and cubic_gap is not None and cubic_gap >= strict
    return ok, f"worst gap={worst_gap:+.2e} (>= -{tol:g}), cubic gap={cubic_gap:.3f} (>= {strict:g})"


def check_capacity_closed_form():
    """Closed-form upper cdf values and the smoothed sandwich at n = 1."""
    tol = TOLERANCES["capacity_closed_form"]
    dist = SemiGNormal(BAND_12)
    targets = {
        -1.0: float(std_normal_cdf(-0.5)),
        0.0: 0.5,
        1.0: float(std_normal_cdf(1.0)),
    }
    worst = max(abs(upper_cdf(dist, y) - v) for y, v in targets.items())
    c = 4.0
    exact = 2.0 * (1.0 - float(std_normal_cdf(c / BAND_12.sigma_hi)))
    query = ConfidenceQuery(weights=(1.0,), band=BAND_12, alpha=0.05, family="L")
    sandwich_ok = True
    for delta in (0.01 * c, 0.005 * c):
        est = weighted_sum_capacity(query, c, delta=delta)
        sandwich_ok = sandwich_ok and est.inner <= exact <= est.outer
    ok = worst <= tol and sandwich_ok
    return ok, f"cdf err={worst:.2e} tol={tol:g}; sandwich ok={sandwich_ok}"


def check_robust_coverage():
    """Feedback-family interval covers under every policy; the naive one fails."""
    reps = 100_000
    alpha = 0.05
    query = ConfidenceQuery.from_design(np.arange(1.0, 21.0), BAND_12, alpha, family="L")
    cv = robust_critical_value(query)
    rows = coverage_simulation(query, cv.c, reps=reps, rng=RngStream(2024), dp_policy=cv.policy)
    failures = []
    for row in rows:
        bound = (1.0 - alpha) - 3.0 * math.sqrt(alpha * (1.0 - alpha) / reps)
        if row.coverage < bound:
            failures.append(f"{row.policy}={row.coverage:.4f}<{bound:.4f}")
    naive_c = classical_critical_value(query, BAND_12.sigma_lo)
    naive = coverage_simulation(
        query, naive_c, policies=("sign-feedback",), reps=reps, rng=RngStream(2024)
    )[0]
    naive_bound = (1.0 - alpha) - 3.0 * naive.std_error
    naive_fails = naive.coverage < naive_bound
    ok = not failures and naive_fails
    robust_part = "; ".join(f"{r.policy}={r.coverage:.4f}" for r in rows)
    return ok, f"c={cv.c:.5f}; {robust_part}; naive(sign-feedback)={naive.coverage:.4f} (must undercover)"


def check_reversed_product_mean():
    """Order-reversed product mean: closed form and Monte Carlo agree."""
    tol = TOLERANCES["exact"]
    upper, lower = reversed_product_mean(BAND_12)
    expected = 0.5 * math.sqrt(2.0 / math.pi)
    closed_ok = abs(upper - expected) <= tol and abs(lower + expected) <= tol
    gen = RngStream(99).generator()
    eps = gen.standard_normal(1_000_000)
    # adversarial scale: top of the band on positive noise, bottom otherwise
    vals = eps * np.where(eps > 0, BAND_12.sigma_hi, BAND_12.sigma_lo)
    mc, se = float(vals.mean()), float(vals.std(ddof=1) / 1000.0)
    mc_ok = abs(mc - upper) <= 4.0 * se
    ok = closed_ok and mc_ok
    return ok, f"upper={upper:.12f} expected={expected:.12f}; mc={mc:.5f} (4se={4*se:.5f})"


def check_semiseq_swap_invariance():
    """Argument order is irrelevant under semi-sequential independence."""
    tol = TOLERANCES["swap_invariance"]
    phis = [
        tf.monomial([1, 2]),
        tf.monomial([2, 1]),
        tf.monomial([3, 1]),
        tf.monomial([2, 2]),
        tf.monomial([1, 4]),
        tf.power_of_sum([1, 1], 2),
        tf.power_of_sum([1, 1], 3),
        tf.power_of_sum([1, -1], 3),
        tf.power_of_sum([0.6, 0.8], 4),
        tf.power_of_sum([2, 1], 2),
    ]
    worst = max(symmetry_check(phi, BAND_12).semiseq_gap for phi in phis)
    return worst <= tol, f"worst swap gap={worst:.2e} tol={tol:g}"


def check_max_mean_demo():
    """Blocked max-mean estimates the band value, not the nonlinear-heat one."""
    report = max_mean_demo(
        _cubic(), BAND_HALF, m=17, samples_per_block=100_000, rng=RngStream(314)
    )
    near_band = abs(report.max_mean - report.band_value) <= 4.0 * report.std_error
    far_from_pde = abs(report.max_mean - report.pde_value) > 10.0 * report.std_error
    ok = near_band and far_from_pde
    return ok, (
        f"max-mean={report.max_mean:.4f} (se={report.std_error:.4f}), "
        f"band={report.band_value:.2e}, pde={report.pde_value:.4f}"
    )


CRITERIA = (
    (1, "sequential third moment matches the closed form", check_sequential_third_moment),
    (2, "semi-sequential third moment vanishes", check_semiseq_third_moment_zero),
    (3, "even moments match the double-factorial form", check_even_moments),
    (4, "fifth moment via recursion matches the odd-moment oracle", check_odd_moment_dp),
    (5, "asymmetric product-moment pair", check_asymmetry_pair),
    (6, "convex/concave collapse across independence modes", check_convex_concave_collapse),
    (7, "skeleton enumeration equals nested recursion", check_skeleton_equals_dp),
    (8, "iterative value converges to the PDE oracle", check_iterative_vs_pde),
    (9, "iterative value dominates the band value", check_dominance),
    (10, "capacity closed forms and smoothing sandwich", check_capacity_closed_form),
    (11, "robust interval covers; naive interval does not", check_robust_coverage),
    (12, "reversed-product mean uncertainty", check_reversed_product_mean),
    (13, "semi-sequential argument-swap invariance", check_semiseq_swap_invariance),
    (14, "blocked max-mean is not a G-normal estimator", check_max_mean_demo),
)


def run_criterion(cid: int) -> CriterionResult:
    for num, description, fn in CRITERIA:
        if num == cid:
            start = time.perf_counter()
            passed, detail = fn()
            return CriterionResult(
                cid=num,
                description=description,
                passed=passed,
                detail=detail,
                seconds=time.perf_counter() - start,
            )
    raise ValueError(f"no criterion {cid}")


def run_all(stream=None) -> list[CriterionResult]:
    results = []
    for cid, _, _ in CRITERIA:
        result = run_criterion(cid)
        results.append(result)
        if stream is not None:
            status = "PASS" if result.passed else "FAIL"
            stream.write(
                f"{status} criterion {result.cid:2d} [{result.seconds:6.1f}s] "
                f"{result.description}: {result.detail}\n"
            )
            stream.flush()
    return results
