"""Backward recursion on a uniform state grid.

One engine serves both the iterative approximation of the G-normal
expectation (equal weights 1/sqrt(n)) and the weighted-sum procedure:
starting from the terminal payoff, each step replaces the current iterate
``f`` by ``x -> max over sigma of E[f(x + a * sigma * Z)]`` and records the
maximising sigma, yielding the value at the origin together with a
replayable volatility policy.

Iterates are carried as :class:`GridFunction` objects: uniform grid,
interpolation inside, boundary-tangent extrapolation outside.  The first
step evaluates the terminal payoff directly (it is known in closed form),
so kinks in the payoff never pass through an interpolant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .config import DP_GRID_POINTS, DP_HALFWIDTH_MULTIPLIER
from .errors import GridExtentError, NumericError
from .maximal import VarianceBand
from .quadrature import QuadratureRule, RngStream, normal_expectation_batch, rule_for

POLICY_VERSION = 1

_INTERPOLATIONS = ("cubic", "pchip", "linear")


@dataclass
class GridFunction:
    """Piecewise-interpolated function on a uniform 1-D grid.

    ``interp`` selects the inner scheme: "cubic" (not-a-knot spline, exact
    on cubic data), "pchip" (monotone-safe) or "linear".  Outside
    [x_lo, x_hi] the value continues along the boundary tangent line.
    """

    x_lo: float
    x_hi: float
    values: np.ndarray
    interp: str = "cubic"
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("GridFunction needs a 1-D array of at least two values")
        if not self.x_lo < self.x_hi:
            raise ValueError("need x_lo < x_hi")
        if self.interp not in _INTERPOLATIONS:
            raise ValueError(f"interp must be one of {_INTERPOLATIONS}")

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def step(self) -> float:
        return (self.x_hi - self.x_lo) / (self.n_points - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n_points)

    @classmethod
    def from_callable(cls, fn, x_lo, x_hi, n_points, interp="cubic"):
        x = np.linspace(x_lo, x_hi, n_points)
        return cls(x_lo=x_lo, x_hi=x_hi, values=np.asarray(fn(x), dtype=float), interp=interp)

    def _ensure_spline(self):
        if self._spline is None and self.interp != "linear":
            maker = CubicSpline if self.interp == "cubic" else PchipInterpolator
            self._spline = maker(self.grid, self.values)
        return self._spline

    def _boundary_slopes(self):
        if self.interp == "linear":
            h = self.step
            return (self.values[1] - self.values[0]) / h, (self.values[-1] - self.values[-2]) / h
        d = self._ensure_spline().derivative()
        return float(d(self.x_lo)), float(d(self.x_hi))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inner = np.clip(x, self.x_lo, self.x_hi)
        if self.interp == "linear":
            vals = np.interp(inner, self.grid, self.values)
        else:
            vals = self._ensure_spline()(inner)
        below = x < self.x_lo
        above = x > self.x_hi
        if below.any() or above.any():
            slope_lo, slope_hi = self._boundary_slopes()
            vals = vals + np.where(below, slope_lo * (x - self.x_lo), 0.0)
            vals = vals + np.where(above, slope_hi * (x - self.x_hi), 0.0)
        return vals


def sigma_set_values(sigma_set, band: VarianceBand) -> np.ndarray:
    """Resolve a sigma-set spec into an ascending array of candidates.

    Accepts "two-point", "three-point", an integer m (uniform grid of m
    points) or an explicit sequence.
    """
    lo, hi = band.sigma_lo, band.sigma_hi
    if isinstance(sigma_set, str):
        if sigma_set == "two-point":
            values = [lo, hi]
        elif sigma_set == "three-point":
            values = [lo, 0.5 * (lo + hi), hi]
        else:
            raise ValueError(f"unknown sigma set {sigma_set!r}")
    elif isinstance(sigma_set, int):
        if sigma_set < 2:
            raise ValueError("sigma grid needs at least two points")
        values = np.linspace(lo, hi, sigma_set)
    else:
        values = [float(s) for s in sigma_set]
        if any(s < lo - 1e-15 or s > hi + 1e-15 for s in values):
            raise ValueError("explicit sigma values must lie inside the band")
    return np.unique(np.asarray(values, dtype=float))


@dataclass
class IterationSchedule:
    """Configuration of a backward recursion run.

    ``weights`` absent means the equal-step schedule 1/sqrt(n_steps); when
    present it must have one entry per step.
    """

    n_steps: int
    sigma_set: object = "two-point"
    weights: tuple | None = None
    grid_halfwidth_multiplier: float = DP_HALFWIDTH_MULTIPLIER
    grid_points: int = DP_GRID_POINTS
    interp: str = "cubic"
    keep_surface: bool = False

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if self.weights is not None:
            self.weights = tuple(float(w) for w in self.weights)
            if len(self.weights) != self.n_steps:
                raise ValueError("need one weight per step")


@dataclass
class SigmaPolicy:
    """Optimal volatility feedback rule extracted from a recursion.

    ``tables[t]`` holds the maximising sigma at forward time t+1 as a
    function of the accumulated weighted sum, tabulated on the state grid
    (piecewise-constant lookup at the nearest grid point).
    """

    x_lo: float
    x_hi: float
    tables: tuple
    sigma_values: tuple
    weights: tuple
    band: VarianceBand
    version: int = POLICY_VERSION

    @property
    def n_steps(self) -> int:
        return len(self.tables)

    def lookup(self, step: int, x):
        """Sigma chosen at forward step ``step`` (0-based) for state x."""
        table = self.tables[step]
        n = table.size
        h = (self.x_hi - self.x_lo) / (n - 1)
        idx = np.clip(np.rint((np.asarray(x, dtype=float) - self.x_lo) / h).astype(int), 0, n - 1)
        return table[idx]

    def to_json(self) -> str:
        return json.dumps(
            {
                "policy_version": self.version,
                "grid": {"x_lo": self.x_lo, "x_hi": self.x_hi, "points": int(self.tables[0].size)},
                "band": [self.band.sigma_lo, self.band.sigma_hi],
                "weights": list(self.weights),
                "sigma_values": list(self.sigma_values),
                "tables": [t.tolist() for t in self.tables],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SigmaPolicy":
        payload = json.loads(text)
        if payload["policy_version"] != POLICY_VERSION:
            raise ValueError(f"unsupported policy version {payload['policy_version']}")
        return cls(
            x_lo=payload["grid"]["x_lo"],
            x_hi=payload["grid"]["x_hi"],
            tables=tuple(np.asarray(t, dtype=float) for t in payload["tables"]),
            sigma_values=tuple(payload["sigma_values"]),
            weights=tuple(payload["weights"]),
            band=VarianceBand(*payload["band"]),
        )


class _BranchMax:
    """Pointwise maximum of per-sigma branch functions.

    The maximising step puts derivative kinks into the iterate where the
    optimal sigma switches; a single global interpolant smears them, and
    plain Gauss-Hermite integration across them loses accuracy.  Each
    branch (the Gaussian smoothing of the previous iterate at one sigma)
    is smooth, so the iterate is carried as interpolated branches with the
    max taken at evaluation time, and the crossing points are located and
    declared as kinks so the next integration step can split its panels
    there.
    """

    def __init__(self, branches, x, stacked, best):
        self.branches = branches
        self._kinks = self._locate_crossings(x, stacked, best)

    def _locate_crossings(self, x, stacked, best):
        from scipy.optimize import brentq

        # ignore maximiser jitter where the branches are numerically tied
        significance = 1e-12 * (1.0 + float(np.abs(stacked).max()))
        kinks = []
        switches = np.flatnonzero(np.diff(best) != 0)
        for i in switches:
            k1, k2 = best[i], best[i + 1]
            fa = stacked[k1, i] - stacked[k2, i]
            fb = stacked[k1, i + 1] - stacked[k2, i + 1]
            if abs(fa) + abs(fb) < significance:
                continue
            if abs(fa) < significance:
                kinks.append(float(x[i]))
            elif abs(fb) < significance:
                kinks.append(float(x[i + 1]))
            elif fa > 0 > fb:
                gap = lambda y: float(self.branches[k1](y) - self.branches[k2](y))
                kinks.append(brentq(gap, x[i], x[i + 1], xtol=1e-13))
            else:
                kinks.append(0.5 * (x[i] + x[i + 1]))
        return tuple(kinks[:16])

    def kink_points(self):
        return self._kinks

    def __call__(self, x):
        out = self.branches[0](x)
        for b in self.branches[1:]:
            out = np.maximum(out, b(x))
        return out


def dp_step(current, scale_fn, sigmas: np.ndarray, rule: QuadratureRule):
    """One smoothing-and-maximisation step of the backward recursion.

    ``current`` is the previous iterate (a :class:`GridFunction`, whose own
    grid defines the state points) and ``scale_fn`` maps a sigma candidate
    to the effective noise scale of this step.  Returns the next iterate
    and the per-state maximising sigma; ties resolve to the smaller sigma.
    """
    x = current.grid
    stacked, best = _branch_values(current, x, scale_fn, sigmas, rule, current.interp)[:2]
    next_values = np.take_along_axis(stacked, best[None, :], axis=0)[0]
    nxt = GridFunction(x_lo=float(x[0]), x_hi=float(x[-1]), values=next_values, interp=current.interp)
    return nxt, sigmas[best]


def _branch_values(evaluate, x, scale_fn, sigmas, rule, interp):
    # normal_expectation_batch dispatches on declared kinks: the terminal
    # payoff and every _BranchMax iterate advertise theirs, so no step
    # integrates across a kink with plain Gauss-Hermite
    stacked = np.empty((sigmas.size, x.size))
    branches = []
    for k, s in enumerate(sigmas):
        stacked[k] = normal_expectation_batch(evaluate, x, scale_fn(s), rule)
        branches.append(GridFunction(x_lo=float(x[0]), x_hi=float(x[-1]),
                                     values=stacked[k], interp=interp))
    if not np.isfinite(stacked).all():
        k, i = np.argwhere(~np.isfinite(stacked))[0]
        raise NumericError(
            f"non-finite iterate at grid point x={x[i]:.6g} (sigma={sigmas[k]:.6g})"
        )
    best = np.argmax(stacked, axis=0)  # first max: smaller sigma wins ties
    return stacked, best, branches


@dataclass
class GemResult:
    value: float
    policy: SigmaPolicy
    surface: list | None = None


def gem_weighted_sum(
    phi,
    band: VarianceBand,
    weights,
    sigma_set="two-point",
    *,
    grid_points: int = DP_GRID_POINTS,
    grid_halfwidth_multiplier: float = DP_HALFWIDTH_MULTIPLIER,
    interp: str = "cubic",
    rule: QuadratureRule | None = None,
    keep_surface: bool = False,
) -> GemResult:
    """Upper expectation of ``phi(sum_i a_i W_i)`` by backward recursion.

    Processes the weights in reverse order: step i maximises over the
    sigma of W_{n-i}, so the extracted policy, re-indexed forward, gives
    sigma_t as a function of the accumulated sum before time t.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0 or np.all(weights == 0):
        raise ValueError("weights must be a nonempty vector, not all zero")
    if phi.arity != 1:
        raise ValueError("the terminal payoff must be a scalar function")
    if rule is None:
        rule = rule_for(phi)
    sigmas = sigma_set_values(sigma_set, band)
    norm = float(np.linalg.norm(weights))
    if band.sigma_hi == 0.0:
        value = float(phi(np.asarray(0.0)))
        policy = SigmaPolicy(
            x_lo=-1.0,
            x_hi=1.0,
            tables=tuple(np.zeros(2) for _ in weights),
            sigma_values=tuple(sigmas),
            weights=tuple(weights),
            band=band,
        )
        return GemResult(value=value, policy=policy)
    if grid_halfwidth_multiplier < 1.0:
        raise GridExtentError(
            "state grid would not cover six standard deviations of the total sum; "
            f"use grid_halfwidth_multiplier >= 1 (default {DP_HALFWIDTH_MULTIPLIER})",
            suggested_multiplier=DP_HALFWIDTH_MULTIPLIER,
        )
    m = grid_halfwidth_multiplier * 6.0 * band.sigma_hi * norm
    if grid_points % 2 == 0:
        grid_points += 1  # keep the origin exactly on the grid
    x = np.linspace(-m, m, grid_points)

    n = weights.size
    tables_backward = []
    surface = [] if keep_surface else None
    evaluate = phi
    stacked = None
    for i in range(n):
        a = weights[n - 1 - i]
        stacked, best, branches = _branch_values(
            evaluate, x, lambda s, a=a: abs(a) * s, sigmas, rule, interp
        )
        tables_backward.append(sigmas[best])
        evaluate = _BranchMax(branches, x, stacked, best)
        if keep_surface:
            iterate = np.take_along_axis(stacked, best[None, :], axis=0)[0]
            surface.append(GridFunction(x_lo=float(x[0]), x_hi=float(x[-1]),
                                        values=iterate, interp=interp))
    center = grid_points // 2
    value = float(stacked[:, center].max())
    policy = SigmaPolicy(
        x_lo=float(x[0]),
        x_hi=float(x[-1]),
        tables=tuple(reversed(tables_backward)),
        sigma_values=tuple(sigmas),
        weights=tuple(weights),
        band=band,
    )
    return GemResult(value=value, policy=policy, surface=surface)


@dataclass
class IterativeResult:
    value: float
    policy: SigmaPolicy
    surface: list | None = None


def gnormal_expectation_iterative(phi, band: VarianceBand, schedule: IterationSchedule) -> IterativeResult:
    """Iterative approximation of the G-normal upper expectation.

    Runs the recursion with equal weights 1/sqrt(n): the value at the
    origin converges to the G-normal expectation of ``phi`` as the number
    of steps grows.  The intermediate iterates approximate the whole
    solution surface of the associated nonlinear heat equation (iterate i
    corresponds to time 1 - i/n) and are returned when requested.
    """
    if schedule.weights is not None:
        raise ValueError("the iterative approximation uses implied equal weights; pass weights=None")
    n = schedule.n_steps
    w = np.full(n, 1.0 / math.sqrt(n))
    res = gem_weighted_sum(
        phi,
        band,
        w,
        schedule.sigma_set,
        grid_points=schedule.grid_points,
        grid_halfwidth_multiplier=schedule.grid_halfwidth_multiplier,
        interp=schedule.interp,
        keep_surface=schedule.keep_surface,
    )
    return IterativeResult(value=res.value, policy=res.policy, surface=res.surface)


def policy_replay(policy: SigmaPolicy, weights, band: VarianceBand, phi, samples: int, rng: RngStream):
    """Monte Carlo replay of an extracted policy.

    Simulates standard normal noise, looks the per-step sigma up at the
    running weighted sum, and returns the sample mean of the payoff with
    its standard error.  The configuration must match the one the policy
    was extracted with.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.size != policy.n_steps or not np.allclose(weights, policy.weights):
        raise ValueError("weights do not match the policy configuration")
    if band != policy.band:
        raise ValueError("band does not match the policy configuration")
    if samples < 2:
        raise ValueError("need at least two samples")
    gen = rng.generator()
    eps = gen.standard_normal((samples, policy.n_steps))
    state = np.zeros(samples)
    for t in range(policy.n_steps):
        sig = policy.lookup(t, state)
        state = state + weights[t] * sig * eps[:, t]
    vals = np.asarray(phi(state), dtype=float)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(samples))
    return mean, se
