"""Upper/lower distribution functions and robust confidence intervals.

For a semi-G-normal variable the upper and lower cdf have closed forms
(the extreme volatility depends on the sign of the threshold).  For the
weighted sum behind a regression slope the exceedance capacity
``P_upper(|sum a_i W_i| > c)`` is computed two ways: in the constant-
volatility family by a closed normal form, and in the feedback family by
the backward recursion on a smoothed exceedance indicator, reported with
an inner/outer sandwich so the smoothing error is observable.  Inverting
the capacity in c gives a critical value whose confidence interval covers
at the nominal rate regardless of the unknown volatility dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .config import (
    CAPACITY_SMOOTHING_FRACTION,
    DP_GRID_POINTS,
    TOLERANCES,
)
from .errors import NumericError
from .griddp import SigmaPolicy, gem_weighted_sum
from .maximal import VarianceBand
from .quadrature import RngStream, std_normal_cdf
from .semignormal import SemiGNormal
from .testfuncs import indicator_abs_above

FAMILY_CONSTANT = "S"
FAMILY_FEEDBACK = "L"


def _normalize_family(family: str) -> str:
    key = str(family).strip().upper().rstrip("N").rstrip("_")
    if key in ("S",):
        return FAMILY_CONSTANT
    if key in ("L",):
        return FAMILY_FEEDBACK
    raise ValueError(f"unknown family {family!r}; use 'S' (constant) or 'L' (feedback)")


def upper_cdf(dist: SemiGNormal, y: float) -> float:
    """sup over the band of P(sigma * Z <= y).

    For y >= 0 the bottom of the band is extremal, for y < 0 the top.  A
    band touching zero contains the point mass at the origin, so the
    supremum is 1 for every y >= 0.
    """
    lo, hi = dist.sigma_lo, dist.sigma_hi
    if y >= 0:
        if lo == 0.0:
            return 1.0
        return float(std_normal_cdf(y / lo))
    if hi == 0.0:
        return 0.0
    return float(std_normal_cdf(y / hi))


def lower_cdf(dist: SemiGNormal, y: float) -> float:
    """inf over the band of P(sigma * Z <= y); mirror of :func:`upper_cdf`."""
    lo, hi = dist.sigma_lo, dist.sigma_hi
    if y >= 0:
        if hi == 0.0:
            return 1.0
        return float(std_normal_cdf(y / hi))
    if lo == 0.0:
        return 0.0
    return float(std_normal_cdf(y / lo))


@dataclass(frozen=True)
class CapacityCurve:
    """Sampled upper and lower cdf over a threshold grid."""

    thresholds: tuple
    upper: tuple
    lower: tuple
    smoothing_width: float | None = None

    def __post_init__(self):
        if not all(u >= l - 1e-12 for u, l in zip(self.upper, self.lower)):
            raise ValueError("upper cdf must dominate lower cdf pointwise")

    def rows(self):
        return list(zip(self.thresholds, self.upper, self.lower))


def capacity_curve(dist: SemiGNormal, thresholds) -> CapacityCurve:
    """Exact upper/lower cdf curve of a semi-G-normal variable."""
    ts = tuple(sorted(float(t) for t in thresholds))
    return CapacityCurve(
        thresholds=ts,
        upper=tuple(upper_cdf(dist, t) for t in ts),
        lower=tuple(lower_cdf(dist, t) for t in ts),
        smoothing_width=None,
    )


@dataclass(frozen=True)
class ConfidenceQuery:
    """Weighted-sum exceedance query for slope inference.

    ``weights`` are the least-squares weights a_i = (x_i - xbar) /
    sum (x_i - xbar)^2 of the design, or any nonzero vector.
    """

    weights: tuple
    band: VarianceBand
    alpha: float
    family: str = FAMILY_FEEDBACK

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.all(w == 0):
            raise ValueError("weights must be a nonempty vector, not all zero")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "family", _normalize_family(self.family))
        object.__setattr__(self, "weights", tuple(float(v) for v in w))

    @classmethod
    def from_design(cls, design_x, band: VarianceBand, alpha: float,
                    family: str = FAMILY_FEEDBACK) -> "ConfidenceQuery":
        x = np.asarray(design_x, dtype=float)
        centred = x - x.mean()
        ss = float(centred @ centred)
        if ss == 0.0:
            raise ValueError("design has no variation")
        return cls(weights=tuple(centred / ss), band=band, alpha=alpha, family=family)

    @property
    def weight_norm(self) -> float:
        return float(np.linalg.norm(self.weights))

    @property
    def n(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class CapacityEstimate:
    """Exceedance capacity with its smoothing sandwich.

    ``inner <= exact <= outer``; ``value`` is the midpoint.  For the
    constant family the closed form is exact and the sandwich collapses.
    """

    value: float
    inner: float
    outer: float
    delta: float
    policy: SigmaPolicy | None = None


def _feedback_exceedance(query: ConfidenceQuery, c: float, delta: float, threshold_shift: float,
                         grid_points: int) -> tuple[float, SigmaPolicy]:
    phi = indicator_abs_above(c - threshold_shift, delta)
    res = gem_weighted_sum(phi, query.band, query.weights, grid_points=grid_points)
    return res.value, res.policy


def weighted_sum_capacity(query: ConfidenceQuery, c: float, delta: float | None = None,
                          grid_points: int = DP_GRID_POINTS) -> CapacityEstimate:
    """P_upper(|sum a_i W_i| > c) for the query's policy family.

    Constant family: the worst case is the top of the band, giving
    ``2 (1 - Phi(c / (sigma_hi * |a|)))`` exactly.  Feedback family: the
    indicator is smoothed by a ramp of width delta; the ramp starting at c
    underestimates the exceedance and the ramp ending at c overestimates
    it, bracketing the exact capacity.
    """
    if c <= 0:
        raise ValueError("the threshold c must be positive")
    if query.family == FAMILY_CONSTANT:
        scale = query.band.sigma_hi * query.weight_norm
        if scale == 0.0:
            p = 0.0
        else:
            p = 2.0 * (1.0 - float(std_normal_cdf(c / scale)))
        return CapacityEstimate(value=p, inner=p, outer=p, delta=0.0)
    if delta is None:
        delta = CAPACITY_SMOOTHING_FRACTION * c
    inner, _ = _feedback_exceedance(query, c, delta, 0.0, grid_points)
    outer, policy = _feedback_exceedance(query, c, delta, delta, grid_points)
    return CapacityEstimate(
        value=0.5 * (inner + outer), inner=inner, outer=outer, delta=delta, policy=policy
    )


@dataclass(frozen=True)
class CriticalValue:
    c: float
    achieved_prob: float
    iterations: int
    policy: SigmaPolicy | None


def robust_critical_value(query: ConfidenceQuery, grid_points: int = DP_GRID_POINTS) -> CriticalValue:
    """Smallest c with worst-case exceedance probability alpha.

    Bisection on c over (0, 10 * sigma_hi * |a|].  For the feedback family
    the probe uses the conservative (outer) smoothed estimate, so the
    returned interval keeps its coverage guarantee up to the bisection
    tolerance.
    """
    if not 0.001 < query.alpha < 0.5:
        raise ValueError("alpha must lie in (0.001, 0.5) for critical-value inversion")
    prob_tol = TOLERANCES["bisection_prob"]
    width_tol = TOLERANCES["bisection_width"]
    scale = query.band.sigma_hi * query.weight_norm
    if scale == 0.0:
        return CriticalValue(c=0.0, achieved_prob=0.0, iterations=0, policy=None)

    def probe(c):
        est = weighted_sum_capacity(query, c, grid_points=grid_points)
        return est.outer, est.policy

    lo_c, hi_c = 1e-9 * scale, 10.0 * scale
    p_lo, _ = probe(lo_c)
    p_hi, _ = probe(hi_c)
    if not (p_lo >= query.alpha >= p_hi):
        raise NumericError(
            f"bisection bracket failure: P({lo_c:.3e}) = {p_lo:.4f}, "
            f"P({hi_c:.3e}) = {p_hi:.2e}, alpha = {query.alpha}"
        )
    c, p, policy = hi_c, p_hi, None
    for iteration in range(1, 200):
        c = 0.5 * (lo_c + hi_c)
        p, policy = probe(c)
        if abs(p - query.alpha) <= prob_tol or (hi_c - lo_c) <= width_tol:
            break
        if p > query.alpha:
            lo_c = c
        else:
            hi_c = c
    return CriticalValue(c=c, achieved_prob=p, iterations=iteration, policy=policy)


def classical_critical_value(query: ConfidenceQuery, sigma: float) -> float:
    """z-interval half-width assuming a single known volatility."""
    return float(sigma * query.weight_norm * ndtri(1.0 - query.alpha / 2.0))


POLICY_NAMES = ("const-lo", "const-hi", "iid-uniform", "sign-feedback", "dp-replay")


@dataclass(frozen=True)
class CoverageRow:
    policy: str
    coverage: float
    std_error: float


def coverage_simulation(
    query: ConfidenceQuery,
    c: float,
    policies=POLICY_NAMES,
    reps: int = 100_000,
    rng: RngStream = RngStream(0),
    dp_policy: SigmaPolicy | None = None,
) -> list[CoverageRow]:
    """Empirical coverage of |slope error| <= c under named volatility rules.

    All policies share one matrix of common random normals, so differences
    between rows are not Monte Carlo noise.  "sign-feedback" switches to
    the top of the band after a positive residual; "dp-replay" replays the
    adversarial policy extracted by the recursion (required argument when
    requested).
    """
    gen = rng.generator()
    n = query.n
    lo, hi = query.band.sigma_lo, query.band.sigma_hi
    w = np.asarray(query.weights)
    eps = gen.standard_normal((reps, n))
    uniforms = gen.uniform(lo, hi, size=(reps, n))
    rows = []
    for name in policies:
        if name == "const-lo":
            sums = (w * lo * eps).sum(axis=1)
        elif name == "const-hi":
            sums = (w * hi * eps).sum(axis=1)
        elif name == "iid-uniform":
            sums = (w * uniforms * eps).sum(axis=1)
        elif name == "sign-feedback":
            sums = np.zeros(reps)
            prev = np.zeros(reps)
            for t in range(n):
                sig = np.where(prev > 0, hi, lo)
                prev = sig * eps[:, t]
                sums += w[t] * prev
        elif name == "dp-replay":
            if dp_policy is None:
                raise ValueError("dp-replay requested but no policy supplied")
            sums = np.zeros(reps)
            for t in range(n):
                sig = dp_policy.lookup(t, sums)
                sums += w[t] * sig * eps[:, t]
        else:
            raise ValueError(f"unknown coverage policy {name!r}")
        covered = np.abs(sums) <= c
        p = float(covered.mean())
        se = math.sqrt(max(p * (1.0 - p), 1e-12) / reps)
        rows.append(CoverageRow(policy=name, coverage=p, std_error=se))
    return rows
