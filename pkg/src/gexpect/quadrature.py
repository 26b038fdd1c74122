"""Classical-probability primitives.

Everything downstream reduces sublinear expectations to classical normal
expectations ``E[f(shift + scale * Z)]`` with ``Z ~ N(0,1)``.  This module
provides that inner expectation (probabilists' Gauss-Hermite quadrature),
the standard normal cdf/pdf, exact raw and absolute moments of ``Z``, and
seeded random streams for the Monte Carlo oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import ndtr

from .config import DEFAULT_QUAD_ORDER, HIGH_GROWTH_ORDER
from .errors import NumericError

SQRT_2PI = math.sqrt(2.0 * math.pi)
MAX_QUAD_ORDER = 200


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights such that ``sum(w * f(n)) ~ E[f(Z)]``, Z ~ N(0,1).

    Probabilists' convention: nodes are in Z-units, weights are normalised
    to sum to one and the nodes are symmetric about zero.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def expect(self, values):
        """Contract an array of function values over its last axis."""
        return np.asarray(values) @ self.weights


def gauss_hermite(order: int) -> QuadratureRule:
    """Probabilists' Gauss-Hermite rule of the given order.

    Exact for polynomials of degree <= 2*order - 1 under the N(0,1) weight.
    """
    if not 1 <= order <= MAX_QUAD_ORDER:
        raise ValueError(f"quadrature order must be in [1, {MAX_QUAD_ORDER}], got {order}")
    nodes, weights = hermegauss(order)
    weights = weights / weights.sum()
    return QuadratureRule(nodes=nodes, weights=weights, order=order)


def rule_for(phi, order: int | None = None) -> QuadratureRule:
    """Pick a quadrature rule for a test function.

    The default order doubles once the declared growth order reaches
    ``HIGH_GROWTH_ORDER``, keeping a degree-exactness margin for moment
    computations.
    """
    if order is None:
        order = DEFAULT_QUAD_ORDER
        if getattr(phi, "growth_order", 0) >= HIGH_GROWTH_ORDER:
            order *= 2
    return gauss_hermite(order)


# Composite Gauss-Legendre fallback for piecewise-smooth integrands: the
# domain (in Z-units) is truncated here and split at the integrand's kinks.
_GL_CUT = 10.0
_GL_PANEL_POINTS = 48


_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_PANEL_POINTS)


def kink_points(phi) -> tuple:
    """Locations where ``phi`` is not smooth, if it declares any."""
    getter = getattr(phi, "kink_points", None)
    return tuple(getter()) if getter is not None else ()


def normal_expectation_batch(phi, shifts, scale: float, rule: QuadratureRule | None = None) -> np.ndarray:
    """``E[phi(shift + scale * Z)]`` for an array of shifts.

    Smooth integrands use the Gauss-Hermite rule (exact for polynomials up
    to degree 2*order - 1).  Integrands with declared kinks use composite
    Gauss-Legendre panels split at each state's kink offsets, which keeps
    spectral accuracy for piecewise-smooth payoffs.
    """
    if scale < 0:
        raise ValueError(f"scale must be nonnegative, got {scale}")
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    if scale == 0.0:
        values = np.asarray(phi(shifts), dtype=float)
    else:
        kinks = kink_points(phi)
        if not kinks:
            if rule is None:
                rule = rule_for(phi)
            values = np.asarray(phi(shifts[:, None] + scale * rule.nodes[None, :])) @ rule.weights
        else:
            values = _piecewise_expectation(phi, shifts, scale, kinks)
    if not np.isfinite(values).all():
        raise NumericError("normal expectation is not finite")
    return values


def _piecewise_expectation(phi, shifts, scale, kinks):
    offsets = (np.asarray(kinks, dtype=float)[None, :] - shifts[:, None]) / scale
    offsets = np.sort(np.clip(offsets, -_GL_CUT, _GL_CUT), axis=1)
    m = shifts.size
    bounds = np.concatenate(
        [np.full((m, 1), -_GL_CUT), offsets, np.full((m, 1), _GL_CUT)], axis=1
    )
    total = np.zeros(m)
    half = 0.5 * (_GL_X + 1.0)  # panel-local nodes in [0, 1]
    for p in range(bounds.shape[1] - 1):
        a = bounds[:, p]
        width = bounds[:, p + 1] - a
        u = a[:, None] + width[:, None] * half[None, :]
        integrand = np.asarray(phi(shifts[:, None] + scale * u)) * np.exp(-0.5 * u * u) / SQRT_2PI
        total += width * (integrand @ _GL_W) * 0.5
    return total


def normal_expectation(phi, shift: float, scale: float, rule: QuadratureRule | None = None) -> float:
    """``E[phi(shift + scale * Z)]`` with ``Z ~ N(0,1)``.

    ``phi`` is any vectorised callable.  ``scale = 0`` returns
    ``phi(shift)`` exactly.
    """
    return float(normal_expectation_batch(phi, shift, scale, rule)[0])


def std_normal_cdf(x):
    """Standard normal cdf, accurate to machine precision including tails."""
    return ndtr(x)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def double_factorial(m: int) -> int:
    """m!! with the convention 0!! = (-1)!! = 1."""
    if m <= 0:
        return 1
    result = 1
    while m > 1:
        result *= m
        m -= 2
    return result


def normal_moment(p: int) -> float:
    """Raw moment E[Z^p]: zero for odd p, (p-1)!! for even p."""
    if p < 0:
        raise ValueError("moment order must be nonnegative")
    if p % 2 == 1:
        return 0.0
    return float(double_factorial(p - 1))


def abs_moment(p: int) -> float:
    """Absolute moment E[|Z|^p] in closed form.

    For odd p = 2k+1 this is 2^k * sqrt(2/pi) * k!, a half-normal moment;
    for even p it coincides with the raw moment (p-1)!!.
    """
    if p < 1:
        raise ValueError("absolute moment order must be >= 1")
    if p % 2 == 0:
        return float(double_factorial(p - 1))
    k = (p - 1) // 2
    return 2.0**k * math.sqrt(2.0 / math.pi) * math.factorial(k)


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Equal keys produce bit-identical sample sequences.  Streams must not be
    shared across concurrent tasks; derive one substream per task instead.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([self.seed, self.stream_id])

    def substream(self, offset: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + offset)
