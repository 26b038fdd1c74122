"""Numerics for sublinear expectations built from volatility bands.

The package evaluates upper expectations, capacities, moments and robust
confidence intervals for three related distribution families: maximal
distributions (uncertain constants on an interval), semi-G-normal
distributions (normal scale mixtures over a band) and G-normal
distributions (the central-limit attractor under sequential independence,
characterised by a nonlinear heat equation).  Every quantitative claim is
backed by an independent oracle: closed-form moments, finite-policy
enumeration, finite differences or Monte Carlo.
"""

__version__ = "0.1.0"

from .capacity import (
    CapacityCurve,
    ConfidenceQuery,
    capacity_curve,
    coverage_simulation,
    lower_cdf,
    robust_critical_value,
    upper_cdf,
    weighted_sum_capacity,
)
from .cltcheck import gnormal_clt_check, max_mean_demo, semi_g_clt_lhs, third_moment_emergence
from .errors import GridExtentError, NumericError
from .gheat import PdeConfig, convexity_collapse_check, solve_gheat
from .griddp import (
    GridFunction,
    IterationSchedule,
    SigmaPolicy,
    dp_step,
    gem_weighted_sum,
    gnormal_expectation_iterative,
    policy_replay,
)
from .joint import (
    FULLY_SEQUENTIAL,
    SEMI_SEQUENTIAL,
    SEQUENTIAL,
    SkeletonSet,
    joint_expectation,
    normalized_sum_expectation,
    skeleton_expectation,
    symmetry_check,
)
from .maximal import MaximalDist, VarianceBand, lower_expectation, maximal_expectation, pushforward
from .quadrature import (
    QuadratureRule,
    RngStream,
    abs_moment,
    gauss_hermite,
    normal_expectation,
    std_normal_cdf,
)
from .semignormal import (
    DiagonalBandSet,
    SemiGNormal,
    covariance_bounds,
    moment_oracle_even,
    moment_oracle_odd,
    product_moment_oracle,
    reversed_product_mean,
    upper_expectation,
)
from .testfuncs import TestFunction, convexity_check, evaluate
