"""Maximal distributions on intervals and coordinate rectangles.

The sublinear expectation of a maximally distributed vector is a plain
deterministic maximum of the test function over its support rectangle, so
the computational content here is global maximisation: an exhaustive grid
scan followed by bounded per-coordinate refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .config import MAXIMAL_GRID, REFINE_XATOL
from .testfuncs import NegatedFunction

# Grid scans are capped at this many points; the per-axis resolution is
# reduced automatically for high-dimensional rectangles.
_MAX_SCAN_POINTS = 4_000_000


@dataclass(frozen=True)
class VarianceBand:
    """The closed interval [sigma_lo, sigma_hi] of standard deviations."""

    sigma_lo: float
    sigma_hi: float

    def __post_init__(self):
        if not 0 <= self.sigma_lo <= self.sigma_hi:
            raise ValueError(
                f"need 0 <= sigma_lo <= sigma_hi, got [{self.sigma_lo}, {self.sigma_hi}]"
            )

    @property
    def width(self) -> float:
        return self.sigma_hi - self.sigma_lo

    @property
    def degenerate(self) -> bool:
        return self.sigma_lo == self.sigma_hi

    def as_tuple(self):
        return (self.sigma_lo, self.sigma_hi)


@dataclass(frozen=True)
class MaximalDist:
    """Maximal distribution supported on a product of closed intervals."""

    support: tuple

    def __post_init__(self):
        for lo, hi in self.support:
            if lo > hi:
                raise ValueError(f"empty support interval [{lo}, {hi}]")

    @classmethod
    def from_band(cls, band: VarianceBand) -> "MaximalDist":
        return cls(support=(band.as_tuple(),))

    @classmethod
    def from_intervals(cls, intervals) -> "MaximalDist":
        return cls(support=tuple((float(a), float(b)) for a, b in intervals))

    @property
    def dim(self) -> int:
        return len(self.support)


def _coordinate_refine(fn, point, bounds, passes: int = 2):
    """Cyclic bounded Brent refinement of a maximiser candidate."""
    point = np.array(point, dtype=float)
    for _ in range(passes):
        for k, (lo, hi) in enumerate(bounds):
            if lo == hi:
                continue

            def slice_neg(v, k=k):
                p = point.copy()
                p[k] = v
                return -float(fn(*p))

            res = minimize_scalar(
                slice_neg, bounds=(lo, hi), method="bounded", options={"xatol": REFINE_XATOL}
            )
            if -res.fun > float(fn(*point)):
                point[k] = res.x
    return point, float(fn(*point))


def _grid_scan(fn, support, grid_per_dim):
    d = len(support)
    per_dim = grid_per_dim
    while per_dim**d > _MAX_SCAN_POINTS and per_dim > 5:
        per_dim = per_dim // 2 + 1
    axes = [np.linspace(lo, hi, per_dim if lo < hi else 1) for lo, hi in support]
    mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
    values = np.asarray(fn(*mesh), dtype=float)
    flat_best = int(np.argmax(values))
    idx = np.unravel_index(flat_best, values.shape)
    point = np.array([axes[k][idx[k]] for k in range(d)])
    return point, float(values[idx])


def maximal_expectation(dist: MaximalDist, phi, grid_per_dim: int = MAXIMAL_GRID, refine: bool = True):
    """max of phi over the support rectangle, with its maximiser.

    Exhaustive scan on a uniform product grid locates the basin; per-
    coordinate bounded refinement recovers interior maxima the grid
    misses.  Ties resolve to the first grid point in scan order, which is
    deterministic.
    """
    if phi.arity != dist.dim:
        raise ValueError(f"phi has arity {phi.arity} but the rectangle has dimension {dist.dim}")
    if grid_per_dim < 2:
        raise ValueError("grid_per_dim must be >= 2")
    point, value = _grid_scan(phi, dist.support, grid_per_dim)
    if refine:
        point, value = _coordinate_refine(phi, point, dist.support)
    return value, point


def lower_expectation(dist: MaximalDist, phi, grid_per_dim: int = MAXIMAL_GRID, refine: bool = True):
    """min of phi over the rectangle, by duality with the upper expectation."""
    value, point = maximal_expectation(dist, NegatedFunction(phi), grid_per_dim, refine)
    return -value, point


def pushforward(dist: MaximalDist, psi, grid: int = MAXIMAL_GRID) -> MaximalDist:
    """Image of a maximal distribution under a continuous scalar map.

    The image of a rectangle under a continuous function is an interval,
    so the result is the one-dimensional maximal distribution on
    [min psi, max psi].
    """
    hi, _ = maximal_expectation(dist, psi, grid)
    lo, _ = lower_expectation(dist, psi, grid)
    return MaximalDist(support=((lo, hi),))
