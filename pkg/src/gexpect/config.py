"""Central defaults and tolerances.

Every named tolerance used by the verification suite and the CLI lives here,
so there is exactly one source of truth.  CLI runs may override individual
entries with ``--tol NAME=VALUE``; the resolved values are echoed into the
run manifest.
"""

# Numerical defaults ---------------------------------------------------------

#: Gauss-Hermite order used when the test function has moderate growth.
DEFAULT_QUAD_ORDER = 40
#: Growth order at which the quadrature order is doubled.
HIGH_GROWTH_ORDER = 6

#: Points in the one-dimensional sigma search grid (before refinement).
SIGMA_GRID = 65
#: Sigma grid used inside nested (per-state) maximisations.
NESTED_SIGMA_GRID = 33

#: Grid scan resolution per coordinate for rectangle maximisation.
MAXIMAL_GRID = 129
#: Argument tolerance of the bounded refinement passes.
REFINE_XATOL = 1e-10

#: Backward-recursion state grid: number of points and halfwidth multiplier.
DP_GRID_POINTS = 1281
DP_HALFWIDTH_MULTIPLIER = 1.5

#: Half-range quadrature points for sign-split integrals.
HALF_RANGE_POINTS = 101

#: Relative smoothing width used for capacity indicators (delta = c * this).
CAPACITY_SMOOTHING_FRACTION = 0.01

# Tolerances (shared by the acceptance suite and the CLI) --------------------

TOLERANCES = {
    # closed-form moment identities checked through the joint evaluator
    "moment_closed_form": 1e-6,
    # |semi-sequential third moment| must vanish below this
    "semiseq_zero": 1e-9,
    # relative tolerance for even-moment identities
    "even_moment_rel": 1e-8,
    # convex/concave collapse across independence modes
    "mode_collapse": 1e-8,
    # skeleton enumeration vs sequential evaluation
    "skeleton_vs_dp": 1e-6,
    # iterative value vs PDE oracle at the largest step count
    "dp_vs_pde": 1e-2,
    # slack factor allowed in the monotone error-decay check
    "decay_slack": 1.10,
    # dominance of the iterative value over the one-step value
    "dominance": 1e-8,
    # strict dominance gap required for a cubic payoff
    "dominance_strict": 1e-3,
    # closed-form capacity values
    "capacity_closed_form": 1e-10,
    # probability tolerance of the critical-value bisection
    "bisection_prob": 1e-4,
    # bracket width at which the bisection stops
    "bisection_width": 1e-6,
    # exact closed forms (reversed-product mean, duality)
    "exact": 1e-12,
    # argument-swap invariance under semi-sequential independence
    "swap_invariance": 1e-10,
}
