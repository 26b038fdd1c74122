"""Joint upper expectations under the three independence modes.

Semi-sequential independence makes the volatilities a constant vector, so
the joint expectation is a rectangle maximum of classical mixture
expectations (corner enumeration plus per-coordinate refinement over a
tensor quadrature).  Sequential and fully-sequential independence allow
each volatility to feed back on earlier outcomes; expectations of
functions of (W_1, ..., W_n) coincide for the two, and are computed by
nested one-step maximisations: directly for n = 2, through a tabulated
inner value function for n = 3, by the grid recursion for weighted powers
of sums at any n, and by an exact piecewise-linear recursion for monomial
products at any n.

The two-variable skeleton sets reduce the same sequential maximum to a
finite policy family for products and powers of sums: four constant
volatility pairs, or eight sign-feedback policies in which the second
volatility switches on the sign of the first outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product as iter_product

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import brentq, minimize_scalar

from .config import NESTED_SIGMA_GRID, HALF_RANGE_POINTS, REFINE_XATOL, SIGMA_GRID
from .griddp import gem_weighted_sum
from .maximal import VarianceBand
from .quadrature import QuadratureRule, abs_moment, gauss_hermite, normal_moment, std_normal_pdf
from .semignormal import SemiGNormal, maximize_over_band, upper_expectation
from .testfuncs import (
    MONOMIAL_PRODUCT,
    POWER_OF_WEIGHTED_SUM,
    SwappedFunction,
    monomial,
    polynomial,
    power_of_sum,
)

SEMI_SEQUENTIAL = "semi-sequential"
SEQUENTIAL = "sequential"
FULLY_SEQUENTIAL = "fully-sequential"
_MODES = (SEMI_SEQUENTIAL, SEQUENTIAL, FULLY_SEQUENTIAL)

_MAX_SEMISEQ_DIM = 6
_MAX_NESTED_DIM = 3


def _normalize_mode(mode: str) -> str:
    key = str(mode).strip().lower().replace("_", "-")
    if key in ("semi", "semiseq", "semi-seq"):
        key = SEMI_SEQUENTIAL
    if key in ("seq",):
        key = SEQUENTIAL
    if key in ("full", "fullseq", "full-seq", "fully"):
        key = FULLY_SEQUENTIAL
    if key not in _MODES:
        raise ValueError(f"unknown independence mode {mode!r}")
    return key


def _tensor_order(d: int) -> int:
    return {1: 40, 2: 40, 3: 24, 4: 16, 5: 10, 6: 10}[d]


def _tensor_expect(phi, sigma_vec, rule: QuadratureRule) -> float:
    """E[phi(s_1 Z_1, ..., s_d Z_d)] with independent standard normals."""
    d = len(sigma_vec)
    meshes = np.meshgrid(*(s * rule.nodes for s in sigma_vec), indexing="ij", sparse=True)
    vals = np.asarray(phi(*meshes), dtype=float)
    for _ in range(d):
        vals = vals @ rule.weights
    return float(vals)


# -- semi-sequential: rectangle maximisation ------------------------------

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _semiseq_value(phi, band: VarianceBand, rule: QuadratureRule | None):
    d = phi.arity
    if d > _MAX_SEMISEQ_DIM:
        raise NotImplementedError(
            f"semi-sequential rectangle search is limited to n <= {_MAX_SEMISEQ_DIM}, got {d}"
        )
    if rule is None:
        rule = gauss_hermite(_tensor_order(d))
    if d == 1:
        value, sig = upper_expectation(SemiGNormal(band), phi, rule=rule, use_shortcut=False)
        return value, np.array([sig])
    lo, hi = band.sigma_lo, band.sigma_hi
    best_val, best_vec = -math.inf, None
    for corner in iter_product((lo, hi), repeat=d):
        v = _tensor_expect(phi, corner, rule)
        if v > best_val:
            best_val, best_vec = v, np.array(corner, dtype=float)
    if band.degenerate:
        return best_val, best_vec
    # per-coordinate bounded refinement recovers interior maxima
    vec = best_vec.copy()
    for _ in range(2):
        for k in range(d):
            def slice_neg(s, k=k):
                trial = vec.copy()
                trial[k] = s
                return -_tensor_expect(phi, trial, rule)

            res = minimize_scalar(
                slice_neg, bounds=(lo, hi), method="bounded", options={"xatol": REFINE_XATOL}
            )
            if -res.fun > _tensor_expect(phi, vec, rule):
                vec[k] = res.x
    value = _tensor_expect(phi, vec, rule)
    if value < best_val:
        value, vec = best_val, best_vec
    return value, vec


# -- sequential: nested one-step maximisations ----------------------------


class _InnerValue:
    """Pointwise inner conditional value x1 -> max over s2 of E[phi(x1, s2 Z)].

    The maximum over the band puts derivative kinks where the maximiser
    jumps between band ends; the constructor locates those crossings so
    the outer integration can split its panels there, and evaluation stays
    exact (no interpolation).
    """

    def __init__(self, phi, band, rule, span):
        self.phi = phi
        self.band = band
        self.rule = rule
        self._kinks = self._locate_kinks(span)

    def _branch(self, x1, sig):
        vals = np.asarray(self.phi(np.asarray(x1)[..., None],
                                   sig * self.rule.nodes)) @ self.rule.weights
        return vals

    def _locate_kinks(self, span, scan: int = 513):
        lo, hi = self.band.sigma_lo, self.band.sigma_hi
        if lo == hi:
            return ()
        x = np.linspace(-span, span, scan)
        vals, arg = _max_batch(lambda sig: self._branch_vec(x, sig), x.size, lo, hi)
        # ignore maximiser jitter where the branches are numerically tied
        significance = 1e-12 * (1.0 + float(np.abs(vals).max()))
        kinks = []
        jumps = np.flatnonzero(np.abs(np.diff(arg)) > 0.25 * (hi - lo))
        for i in jumps:
            s_left, s_right = arg[i], arg[i + 1]
            gap = lambda y: float(self._branch(y, s_left) - self._branch(y, s_right))
            fa, fb = gap(x[i]), gap(x[i + 1])
            if abs(fa) + abs(fb) < significance:
                continue
            if abs(fa) < significance:
                kinks.append(float(x[i]))
            elif abs(fb) < significance:
                kinks.append(float(x[i + 1]))
            elif fa * fb < 0:
                kinks.append(brentq(gap, x[i], x[i + 1], xtol=1e-13))
            else:
                kinks.append(0.5 * (x[i] + x[i + 1]))
        return tuple(kinks[:16])

    def _branch_vec(self, x1, sig):
        pts = sig[:, None] * self.rule.nodes[None, :]
        return np.asarray(self.phi(np.asarray(x1)[:, None], pts)) @ self.rule.weights

    def kink_points(self):
        return self._kinks

    def __call__(self, x1):
        x1 = np.asarray(x1, dtype=float)
        flat = x1.ravel()
        vals, _ = _max_batch(
            lambda sig: self._branch_vec(flat, sig), flat.size,
            self.band.sigma_lo, self.band.sigma_hi,
        )
        return vals.reshape(x1.shape)


def _nested2_value(phi, band: VarianceBand, rule: QuadratureRule | None):
    """max over feedback policies of E[phi(W1, W2)], evaluated directly.

    Outer search over sigma_1; for each outer integration point the inner
    conditional expectation is maximised over sigma_2 pointwise, which is
    exactly the two-step backward recursion without a state grid.  The
    inner value's kinks are declared so the outer integral splits there.
    """
    if rule is None:
        rule = gauss_hermite(_tensor_order(2))
    from .quadrature import normal_expectation_batch

    span = max(band.sigma_hi, 1e-12) * 10.5
    inner = _InnerValue(phi, band, rule, span)

    def outer(s1):
        return float(normal_expectation_batch(inner, 0.0, s1, rule)[0])

    value, s1 = maximize_over_band(outer, band, grid=NESTED_SIGMA_GRID)
    return value, s1


def _max_batch(f, batch: int, lo: float, hi: float, grid: int = NESTED_SIGMA_GRID, iters: int = 32):
    """Columnwise max of f over [lo, hi] for a batch of states."""
    if lo == hi:
        s = np.full(batch, lo)
        return f(s), s
    sigmas = np.linspace(lo, hi, grid)
    table = np.stack([f(np.full(batch, s)) for s in sigmas])
    best = np.argmax(table, axis=0)
    cols = np.arange(batch)
    best_vals = table[best, cols]
    a = sigmas[np.maximum(best - 1, 0)]
    b = sigmas[np.minimum(best + 1, grid - 1)]
    for _ in range(iters):
        h = b - a
        x1 = a + (1.0 - _INVPHI) * h
        x2 = a + _INVPHI * h
        f1 = f(x1)
        f2 = f(x2)
        take_left = f1 >= f2
        b = np.where(take_left, x2, b)
        a = np.where(take_left, a, x1)
    mid = 0.5 * (a + b)
    fm = f(mid)
    improved = fm > best_vals
    return np.where(improved, fm, best_vals), np.where(improved, mid, sigmas[best])


def _nested3_value(phi, band: VarianceBand, rule: QuadratureRule | None, state_grid: int = 161):
    """Three-variable nested maximisation with a tabulated inner stage.

    The innermost conditional value function is tabulated on a 2-D state
    grid and carried by a bicubic spline; accuracy is limited by that
    table (about 1e-5 for smooth functions), which is ample for the
    qualitative three-variable demonstrations.
    """
    if rule is None:
        rule = gauss_hermite(_tensor_order(3))
    nodes, w = rule.nodes, rule.weights
    lo, hi = band.sigma_lo, band.sigma_hi
    span = band.sigma_hi * (np.abs(nodes).max() + 1e-9)
    axis = np.linspace(-span, span, state_grid)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    x1f, x2f = xx.ravel(), yy.ravel()

    def f_inner(sig):
        pts = sig[:, None] * nodes[None, :]
        return np.asarray(phi(x1f[:, None], x2f[:, None], pts)) @ w

    h3_vals, _ = _max_batch(f_inner, x1f.size, lo, hi)
    h3 = RectBivariateSpline(axis, axis, h3_vals.reshape(state_grid, state_grid))

    def h2_batch(x1):
        def f(sig):
            pts = sig[:, None] * nodes[None, :]
            grid_x = np.broadcast_to(x1[:, None], pts.shape)
            vals = h3.ev(grid_x.ravel(), pts.ravel()).reshape(pts.shape)
            return vals @ w

        vals, _ = _max_batch(f, x1.shape[0], lo, hi)
        return vals

    def outer(s1):
        return float(h2_batch(s1 * nodes) @ w)

    value, s1 = maximize_over_band(outer, band, grid=NESTED_SIGMA_GRID)
    return value, s1


def monomial_sequential_moment(exponents, scale: float, band: VarianceBand) -> float:
    """Exact sequential upper expectation of c * W_1^p1 * ... * W_n^pn.

    The conditional value of the remaining product is piecewise linear in
    the accumulated prefix product y, of the form alpha*y+ - beta*y-; one
    backward step updates (alpha, beta) in closed form, choosing the top
    or bottom of the band per sign branch.  Odd powers of centred noise
    zero out the slope gap and hence the whole moment.
    """
    lo, hi = band.sigma_lo, band.sigma_hi
    alpha, beta = 1.0, 1.0
    for p in reversed([int(e) for e in exponents]):
        if p == 0:
            continue
        if p % 2 == 0:
            m = normal_moment(p)
            alpha = m * (hi**p * alpha if alpha >= 0 else lo**p * alpha)
            beta = m * (lo**p * beta if beta >= 0 else hi**p * beta)
        else:
            gap = alpha - beta
            sig = hi if gap >= 0 else lo
            c_star = 0.5 * abs_moment(p) * sig**p * gap
            alpha, beta = c_star, -c_star
    c = float(scale)
    return alpha * max(c, 0.0) - beta * max(-c, 0.0)


def joint_expectation(
    phi,
    band: VarianceBand,
    mode: str,
    *,
    method: str = "auto",
    rule: QuadratureRule | None = None,
    return_info: bool = False,
):
    """Upper expectation of phi(W_1, ..., W_n) under an independence mode.

    ``method`` applies to the sequential modes: "auto" picks the exact
    closed recursion for monomial products, the grid recursion for powers
    of weighted sums with n >= 3, and nested maximisation otherwise
    (n <= 3); "nested", "gem" and "closed" force a route.
    """
    mode = _normalize_mode(mode)
    n = phi.arity
    info = {"mode": mode, "n": n}
    if mode == SEMI_SEQUENTIAL:
        value, vec = _semiseq_value(phi, band, rule)
        info.update(method="rectangle", argmax=list(np.atleast_1d(vec)))
        return (value, info) if return_info else value

    variant = getattr(phi, "variant", None)
    if method == "auto":
        if variant == MONOMIAL_PRODUCT:
            method = "closed"
        elif variant == POWER_OF_WEIGHTED_SUM:
            method = "gem"
        elif n <= _MAX_NESTED_DIM:
            method = "nested"
        else:
            raise NotImplementedError(
                f"sequential evaluation of a general {n}-variable function is not supported; "
                f"nested maximisation stops at n = {_MAX_NESTED_DIM} and larger n needs a "
                "monomial product or power of a weighted sum"
            )

    if method == "closed":
        if variant != MONOMIAL_PRODUCT:
            raise ValueError("the closed recursion applies to monomial products only")
        p = phi.param_dict
        value = monomial_sequential_moment(p["exponents"], p["scale"], band)
        info.update(method="closed")
    elif method == "gem":
        if variant != POWER_OF_WEIGHTED_SUM:
            raise ValueError("the grid recursion route needs a power of a weighted sum")
        p = phi.param_dict
        terminal = polynomial([0.0] * p["exponent"] + [1.0])
        res = gem_weighted_sum(terminal, band, p["weights"])
        value = res.value
        info.update(method="gem")
    elif method == "nested":
        if n == 1:
            value, sig = upper_expectation(SemiGNormal(band), phi, rule=rule, use_shortcut=False)
            info.update(method="nested", argmax_sigma1=sig)
        elif n == 2:
            value, sig1 = _nested2_value(phi, band, rule)
            info.update(method="nested", argmax_sigma1=sig1)
        elif n == 3:
            value, sig1 = _nested3_value(phi, band, rule)
            info.update(method="nested", argmax_sigma1=sig1)
        else:
            raise NotImplementedError(f"nested maximisation is limited to n <= {_MAX_NESTED_DIM}")
    else:
        raise ValueError(f"unknown method {method!r}")
    return (value, info) if return_info else value


# -- two-variable skeleton sets -------------------------------------------


@dataclass(frozen=True)
class SkeletonSet:
    """Finite policy family for the two-variable sequential maximum.

    S2 holds the four constant pairs (s1, s2) from the band endpoints; L2
    holds the eight policies with s1 an endpoint and s2 switching between
    endpoints on the sign of the first outcome.
    """

    mode: str
    band: VarianceBand

    def __post_init__(self):
        if self.mode not in ("S2", "L2"):
            raise ValueError("skeleton mode must be 'S2' or 'L2'")

    def policies(self):
        lo, hi = self.band.sigma_lo, self.band.sigma_hi
        if self.mode == "S2":
            return [(s1, s2) for s1 in (lo, hi) for s2 in (lo, hi)]
        return [
            (s1, s21, s22)
            for s1 in (lo, hi)
            for s21 in (lo, hi)
            for s22 in (lo, hi)
        ]


@lru_cache(maxsize=8)
def _half_range_rule(points: int, cutoff: float = 8.0):
    """Nodes/weights for integrals of f(e) * pdf(e) over e in (0, cutoff].

    Gauss-Legendre mapped through the normal density; the tail beyond the
    cutoff is below 1e-14 for polynomially growing integrands.
    """
    x, w = np.polynomial.legendre.leggauss(points)
    nodes = 0.5 * cutoff * (x + 1.0)
    weights = 0.5 * cutoff * w * std_normal_pdf(nodes)
    return nodes, weights


def skeleton_expectation(phi, skeleton: SkeletonSet, rule: QuadratureRule | None = None,
                         half_points: int = HALF_RANGE_POINTS):
    """Maximum of E[phi(s1 Z1, s2 Z2)] over a skeleton policy family.

    Constant policies are integrated by a tensor rule.  Sign-feedback
    policies split the first integral at zero: each half uses a
    Gauss-Legendre rule mapped through the normal density, with the
    second coordinate integrated conditionally at the branch volatility.
    Returns (value, index of the best policy).
    """
    if getattr(phi, "variant", None) not in (MONOMIAL_PRODUCT, POWER_OF_WEIGHTED_SUM) or phi.arity != 2:
        raise ValueError("skeleton evaluation needs a bivariate monomial product or power of a sum")
    if rule is None:
        rule = gauss_hermite(_tensor_order(2))
    values = []
    if skeleton.mode == "S2":
        for s1, s2 in skeleton.policies():
            values.append(_tensor_expect(phi, (s1, s2), rule))
    else:
        e_plus, w_plus = _half_range_rule(half_points)

        def conditional(e1_scaled, s2):
            return (np.asarray(phi(e1_scaled[:, None], s2 * rule.nodes[None, :])) @ rule.weights)

        for s1, s21, s22 in skeleton.policies():
            up = w_plus @ conditional(s1 * e_plus, s22)
            down = w_plus @ conditional(-s1 * e_plus, s21)
            values.append(float(up + down))
    best = int(np.argmax(values))
    return float(values[best]), best


# -- symmetry and normalised sums ------------------------------------------


def _swap(phi):
    variant = getattr(phi, "variant", None)
    if variant == MONOMIAL_PRODUCT:
        p = phi.param_dict
        return monomial(tuple(reversed(p["exponents"])), p["scale"], convexity=phi.convexity)
    if variant == POWER_OF_WEIGHTED_SUM:
        p = phi.param_dict
        return power_of_sum(tuple(reversed(p["weights"])), p["exponent"], convexity=phi.convexity)
    return SwappedFunction(phi)


@dataclass(frozen=True)
class SymmetryReport:
    semiseq: float
    semiseq_swapped: float
    sequential: float
    sequential_swapped: float

    @property
    def semiseq_gap(self) -> float:
        return abs(self.semiseq - self.semiseq_swapped)

    @property
    def sequential_gap(self) -> float:
        return abs(self.sequential - self.sequential_swapped)


def symmetry_check(phi, band: VarianceBand, rule: QuadratureRule | None = None) -> SymmetryReport:
    """Argument-swap comparison across independence modes.

    Semi-sequential values must agree for both argument orders; the
    sequential pair is reported to exhibit the asymmetry of that mode.
    """
    if phi.arity != 2:
        raise ValueError("symmetry check is defined for bivariate functions")
    swapped = _swap(phi)
    return SymmetryReport(
        semiseq=joint_expectation(phi, band, SEMI_SEQUENTIAL, rule=rule),
        semiseq_swapped=joint_expectation(swapped, band, SEMI_SEQUENTIAL, rule=rule),
        sequential=joint_expectation(phi, band, SEQUENTIAL, rule=rule),
        sequential_swapped=joint_expectation(swapped, band, SEQUENTIAL, rule=rule),
    )


def normalized_sum_expectation(phi, band: VarianceBand, n: int, mode: str, **dp_kwargs) -> float:
    """Upper expectation of phi of the normalised sum of n variables.

    Semi-sequentially the normalised sum has the same distribution as a
    single variable, so the value is the one-dimensional band maximum for
    every n; sequentially it is the equal-weight backward recursion.
    """
    if n < 1:
        raise ValueError("n must be positive")
    mode = _normalize_mode(mode)
    if phi.arity != 1:
        raise ValueError("normalised sums take a scalar test function")
    if mode == SEMI_SEQUENTIAL:
        value, _ = upper_expectation(SemiGNormal(band), phi)
        return value
    weights = np.full(n, 1.0 / math.sqrt(n))
    return gem_weighted_sum(phi, band, weights, **dp_kwargs).value
