"""Semi-G-normal distributions: normal scale mixtures over a volatility band.

The upper expectation of ``phi(W)`` for ``W`` semi-G-normal on the band
``[sigma_lo, sigma_hi]`` is ``max over sigma in the band of
E[phi(sigma * Z)]``.  Convex test functions collapse to the top of the
band and concave ones to the bottom, which the evaluator exploits when
the tag is declared.

Also provided: covariance bounds for diagonal band sets and their linear
images, the mean uncertainty of the order-reversed product, and exact
moment formulas for the sum of two sequentially independent variables,
used as oracles by the verification suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np
from scipy.optimize import minimize_scalar

from .config import REFINE_XATOL, SIGMA_GRID
from .maximal import VarianceBand
from .quadrature import (
    QuadratureRule,
    abs_moment,
    double_factorial,
    normal_expectation,
    rule_for,
)
from .testfuncs import CONCAVE, CONVEX, NegatedFunction


@dataclass(frozen=True)
class SemiGNormal:
    """W = V * eps with V maximal on the band and eps ~ N(0,1)."""

    band: VarianceBand

    @property
    def sigma_lo(self) -> float:
        return self.band.sigma_lo

    @property
    def sigma_hi(self) -> float:
        return self.band.sigma_hi


def maximize_over_band(g, band: VarianceBand, grid: int = SIGMA_GRID):
    """Maximise a smooth scalar map over [sigma_lo, sigma_hi].

    Grid scan plus one bounded Brent pass around the best grid point.
    Returns (value, argmax).
    """
    lo, hi = band.sigma_lo, band.sigma_hi
    if lo == hi:
        return g(lo), lo
    sigmas = np.linspace(lo, hi, grid)
    values = np.array([g(s) for s in sigmas])
    k = int(np.argmax(values))
    left = sigmas[max(k - 1, 0)]
    right = sigmas[min(k + 1, grid - 1)]
    best_v, best_s = values[k], sigmas[k]
    if left < right:
        res = minimize_scalar(
            lambda s: -g(s), bounds=(left, right), method="bounded", options={"xatol": REFINE_XATOL}
        )
        if -res.fun > best_v:
            best_v, best_s = -res.fun, float(res.x)
    return float(best_v), float(best_s)


def upper_expectation(
    w: SemiGNormal,
    phi,
    rule: QuadratureRule | None = None,
    sigma_grid: int = SIGMA_GRID,
    use_shortcut: bool = True,
):
    """(value, argmax sigma) of max over the band of E[phi(sigma Z)].

    A declared convex tag short-circuits to the top of the band, a concave
    tag to the bottom; otherwise the band is searched.
    """
    if phi.arity != 1:
        raise ValueError("upper_expectation takes a scalar test function")
    if rule is None:
        rule = rule_for(phi)
    if use_shortcut and phi.convexity == CONVEX:
        s = w.sigma_hi
        return normal_expectation(phi, 0.0, s, rule), s
    if use_shortcut and phi.convexity == CONCAVE:
        s = w.sigma_lo
        return normal_expectation(phi, 0.0, s, rule), s
    return maximize_over_band(
        lambda s: normal_expectation(phi, 0.0, s, rule), w.band, grid=sigma_grid
    )


def lower_expectation(w: SemiGNormal, phi, rule=None, sigma_grid: int = SIGMA_GRID):
    """(value, argmin sigma): the lower expectation -E[-phi] by duality."""
    value, s = upper_expectation(w, NegatedFunction(phi), rule, sigma_grid)
    return -value, s


def reversed_product_mean(band: VarianceBand):
    """Mean uncertainty of the order-reversed product eps * V.

    Reversing the independence direction in the product makes the mean
    uncertain: the upper mean is (sigma_hi - sigma_lo) * E[|Z|] / 2 and the
    lower mean is its negative.
    """
    upper = 0.5 * band.width * abs_moment(1)
    return upper, -upper


# -- diagonal band sets and covariance uncertainty -----------------------


@dataclass(frozen=True)
class DiagonalBandSet:
    """Diagonal covariance uncertainty, optionally pushed through a matrix.

    The base set is {diag(s_1^2, ..., s_d^2) : s_k in band_k}; with a
    transform ``A`` (r x d, r <= d) the set becomes {A S A^T}.
    """

    bands: tuple
    transform: tuple | None = None

    def __post_init__(self):
        if self.transform is not None:
            a = np.asarray(self.transform, dtype=float)
            if a.ndim != 2 or a.shape[1] != len(self.bands) or a.shape[0] > a.shape[1]:
                raise ValueError("transform must be r x d with r <= d")

    @classmethod
    def from_bands(cls, bands, transform=None) -> "DiagonalBandSet":
        bands = tuple(b if isinstance(b, VarianceBand) else VarianceBand(*b) for b in bands)
        if transform is not None:
            transform = tuple(tuple(float(v) for v in row) for row in np.asarray(transform))
        return cls(bands=bands, transform=transform)

    @property
    def base_dim(self) -> int:
        return len(self.bands)

    @property
    def dim(self) -> int:
        if self.transform is None:
            return self.base_dim
        return len(self.transform)


def covariance_bounds(band_set: DiagonalBandSet, i: int, j: int):
    """Range of the (i, j) covariance entry over the uncertainty set.

    Entries of A diag(s^2) A^T are linear in each s_k^2, so the extrema
    sit at band endpoints.  Without a transform this is plain interval
    arithmetic; with one, all 2^d variance corners are enumerated (d <= 20)
    to guard sign cancellations.
    """
    d = band_set.dim
    if not (0 <= i < d and 0 <= j < d):
        raise ValueError(f"indices ({i}, {j}) out of range for dimension {d}")
    lo2 = np.array([b.sigma_lo**2 for b in band_set.bands])
    hi2 = np.array([b.sigma_hi**2 for b in band_set.bands])
    if band_set.transform is None:
        if i != j:
            return 0.0, 0.0
        return float(lo2[i]), float(hi2[i])
    a = np.asarray(band_set.transform, dtype=float)
    if band_set.base_dim > 20:
        # linear in each s_k^2: per-term interval arithmetic is exact
        coef = a[i] * a[j]
        lower = float(np.where(coef > 0, coef * lo2, coef * hi2).sum())
        upper = float(np.where(coef > 0, coef * hi2, coef * lo2).sum())
        return lower, upper
    coef = a[i] * a[j]
    best_lo, best_hi = math.inf, -math.inf
    for corner in iter_product(*zip(lo2, hi2)):
        entry = float(coef @ np.asarray(corner))
        best_lo = min(best_lo, entry)
        best_hi = max(best_hi, entry)
    return best_lo, best_hi


# -- closed-form moment oracles ------------------------------------------


def moment_oracle_even(band: VarianceBand, n: int) -> float:
    """E_upper[(W1 + W2)^n] for even n: the convex case collapses to the
    top of the band, giving (n-1)!! * sigma_hi^n * 2^(n/2)."""
    if n < 2 or n % 2 != 0:
        raise ValueError("even-moment oracle needs an even n >= 2")
    return double_factorial(n - 1) * band.sigma_hi**n * 2.0 ** (n / 2)


def moment_oracle_odd(band: VarianceBand, n: int) -> float:
    """E_upper[(W1 + W2)^n] for odd n >= 3 under sequential independence.

    Expanding the binomial, the surviving cross terms give
        sqrt(2/pi) * sum_k C_k * sigma_hi^(2k+1) * 2^(k-1) * k!
    with C_k = binom(n, 2k+1) * (n-2k-2)!! * (sigma_hi^(n-2k-1) -
    sigma_lo^(n-2k-1)), k = 0 .. (n-3)/2.  The double factorial is the
    raw normal moment E[Z^(n-2k-1)] = (n-2k-2)!!.
    """
    if n < 3 or n % 2 == 0:
        raise ValueError("odd-moment oracle needs an odd n >= 3")
    hi, lo = band.sigma_hi, band.sigma_lo
    total = 0.0
    for k in range(0, (n - 3) // 2 + 1):
        c_k = (
            math.comb(n, 2 * k + 1)
            * double_factorial(n - 2 * k - 2)
            * (hi ** (n - 2 * k - 1) - lo ** (n - 2 * k - 1))
        )
        total += c_k * hi ** (2 * k + 1) * 2.0 ** (k - 1) * math.factorial(k)
    return math.sqrt(2.0 / math.pi) * total


def product_moment_oracle(band: VarianceBand) -> float:
    """E_upper[W1 * W2^2] under sequential independence.

    Equals (sigma_hi^2 - sigma_lo^2) * sigma_hi / sqrt(2 pi); the mirrored
    moment E_upper[W1^2 * W2] is identically zero.
    """
    return (band.sigma_hi**2 - band.sigma_lo**2) * band.sigma_hi / math.sqrt(2.0 * math.pi)
