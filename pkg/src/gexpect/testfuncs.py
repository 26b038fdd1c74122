"""A closed, serialisable vocabulary of test functions.

Each :class:`TestFunction` is a locally-Lipschitz map with declared
convexity and polynomial growth order.  Convexity is user-declared and
verified by a randomised midpoint test, never inferred: inference for
arbitrary composites is undecidable at this scope.

The JSON wire format is ``{"variant", "params", "convexity",
"growth_order"}`` and round-trips bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from .quadrature import RngStream

CONVEX = "convex"
CONCAVE = "concave"
NEITHER = "neither"
UNKNOWN = "unknown"
_CONVEXITIES = (CONVEX, CONCAVE, NEITHER, UNKNOWN)

POLYNOMIAL = "polynomial"
MONOMIAL_PRODUCT = "monomial-product"
POWER_OF_WEIGHTED_SUM = "power-of-weighted-sum"
CALL_PAYOFF = "call-payoff"
PUT_PAYOFF = "put-payoff"
ABS_POWER = "abs-power"
INDICATOR_ABOVE = "smoothed-indicator-above"
INDICATOR_ABS_ABOVE = "smoothed-indicator-abs-above"

_VARIANTS = (
    POLYNOMIAL,
    MONOMIAL_PRODUCT,
    POWER_OF_WEIGHTED_SUM,
    CALL_PAYOFF,
    PUT_PAYOFF,
    ABS_POWER,
    INDICATOR_ABOVE,
    INDICATOR_ABS_ABOVE,
)


@dataclass(frozen=True)
class TestFunction:
    """Tagged test function.  Use the module factories to construct one."""

    variant: str
    params: tuple  # ordered (name, value) pairs; values may be tuples
    convexity: str = UNKNOWN
    growth_order: int = 0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.convexity not in _CONVEXITIES:
            raise ValueError(f"unknown convexity tag {self.convexity!r}")
        if self.growth_order < 0:
            raise ValueError("growth_order must be nonnegative")
        p = self.param_dict
        if self.variant in (INDICATOR_ABOVE, INDICATOR_ABS_ABOVE) and p["width"] <= 0:
            raise ValueError("smoothed indicators need width > 0")
        if self.variant == ABS_POWER and p["p"] <= 0:
            raise ValueError("abs-power exponent must be positive")
        if self.variant == POWER_OF_WEIGHTED_SUM and p["exponent"] < 1:
            raise ValueError("power-of-weighted-sum exponent must be >= 1")

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    @property
    def arity(self) -> int:
        p = self.param_dict
        if self.variant == MONOMIAL_PRODUCT:
            return len(p["exponents"])
        if self.variant == POWER_OF_WEIGHTED_SUM:
            return len(p["weights"])
        return 1

    def __call__(self, *args):
        """Evaluate on scalars or numpy arrays, one argument per coordinate."""
        if len(args) != self.arity:
            raise ValueError(f"{self.variant} takes {self.arity} argument(s), got {len(args)}")
        p = self.param_dict
        if self.variant == POLYNOMIAL:
            x = np.asarray(args[0], dtype=float)
            return np.polynomial.polynomial.polyval(x, np.asarray(p["coefficients"]))
        if self.variant == MONOMIAL_PRODUCT:
            out = p["scale"] * np.ones(np.broadcast(*args).shape if args else ())
            for xi, ei in zip(args, p["exponents"]):
                if ei:
                    out = out * np.asarray(xi, dtype=float) ** ei
            return out
        if self.variant == POWER_OF_WEIGHTED_SUM:
            s = sum(w * np.asarray(xi, dtype=float) for w, xi in zip(p["weights"], args))
            return s ** p["exponent"]
        x = np.asarray(args[0], dtype=float)
        if self.variant == CALL_PAYOFF:
            return np.maximum(x - p["strike"], 0.0)
        if self.variant == PUT_PAYOFF:
            return np.maximum(p["strike"] - x, 0.0)
        if self.variant == ABS_POWER:
            return np.abs(x) ** p["p"]
        if self.variant == INDICATOR_ABOVE:
            return np.clip((x - p["threshold"]) / p["width"], 0.0, 1.0)
        if self.variant == INDICATOR_ABS_ABOVE:
            return np.clip((np.abs(x) - p["threshold"]) / p["width"], 0.0, 1.0)
        raise AssertionError("unreachable")

    def kink_points(self) -> tuple:
        """Points where the function is only piecewise smooth.

        The expectation kernel splits its integration panels here, which
        preserves spectral accuracy for the non-polynomial payoffs.
        """
        p = self.param_dict
        if self.variant == CALL_PAYOFF or self.variant == PUT_PAYOFF:
            return (p["strike"],)
        if self.variant == ABS_POWER:
            power = p["p"]
            if power == int(power) and int(power) % 2 == 0:
                return ()
            return (0.0,)
        if self.variant == INDICATOR_ABOVE:
            return (p["threshold"], p["threshold"] + p["width"])
        if self.variant == INDICATOR_ABS_ABOVE:
            t, w = p["threshold"], p["width"]
            return tuple(sorted({-t - w, -t, 0.0, t, t + w}))
        return ()

    # -- serialisation -------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "variant": self.variant,
            "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params},
            "convexity": self.convexity,
            "growth_order": self.growth_order,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TestFunction":
        payload = json.loads(text)
        params = tuple(
            (k, tuple(v) if isinstance(v, list) else v)
            for k, v in sorted(payload["params"].items())
        )
        return cls(
            variant=payload["variant"],
            params=params,
            convexity=payload["convexity"],
            growth_order=payload["growth_order"],
        )


# -- factories ----------------------------------------------------------


def polynomial(coefficients, convexity: str = UNKNOWN) -> TestFunction:
    """1-D polynomial with coefficients in increasing-degree order."""
    coeffs = tuple(float(c) for c in coefficients)
    degree = max((i for i, c in enumerate(coeffs) if c != 0.0), default=0)
    return TestFunction(
        POLYNOMIAL,
        (("coefficients", coeffs),),
        convexity=convexity,
        growth_order=degree,
    )


def monomial(exponents, scale: float = 1.0, convexity: str = UNKNOWN) -> TestFunction:
    """c * x1^p1 * ... * xn^pn."""
    exps = tuple(int(e) for e in exponents)
    if any(e < 0 for e in exps):
        raise ValueError("monomial exponents must be nonnegative")
    return TestFunction(
        MONOMIAL_PRODUCT,
        (("exponents", exps), ("scale", float(scale))),
        convexity=convexity,
        growth_order=sum(exps),
    )


def power_of_sum(weights, exponent: int, convexity: str = UNKNOWN) -> TestFunction:
    """(a1*x1 + ... + an*xn)^k."""
    return TestFunction(
        POWER_OF_WEIGHTED_SUM,
        (("exponent", int(exponent)), ("weights", tuple(float(w) for w in weights))),
        convexity=convexity,
        growth_order=int(exponent),
    )


def call(strike: float) -> TestFunction:
    return TestFunction(CALL_PAYOFF, (("strike", float(strike)),), convexity=CONVEX, growth_order=1)


def put(strike: float) -> TestFunction:
    return TestFunction(PUT_PAYOFF, (("strike", float(strike)),), convexity=CONVEX, growth_order=1)


def abs_power(p: float) -> TestFunction:
    convexity = CONVEX if p >= 1 else NEITHER
    return TestFunction(ABS_POWER, (("p", float(p)),), convexity=convexity, growth_order=int(np.ceil(p)))


def indicator_above(threshold: float, width: float) -> TestFunction:
    """Piecewise-linear ramp: 0 below ``threshold``, 1 above ``threshold+width``."""
    return TestFunction(
        INDICATOR_ABOVE,
        (("threshold", float(threshold)), ("width", float(width))),
        convexity=NEITHER,
        growth_order=0,
    )


def indicator_abs_above(threshold: float, width: float) -> TestFunction:
    """Ramp in |x|: 0 for |x| <= threshold, 1 for |x| >= threshold+width."""
    return TestFunction(
        INDICATOR_ABS_ABOVE,
        (("threshold", float(threshold)), ("width", float(width))),
        convexity=NEITHER,
        growth_order=0,
    )


def evaluate(phi, x) -> float:
    """Evaluate ``phi`` at a point given as a vector of its arity."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (phi.arity,):
        raise ValueError(f"expected a vector of length {phi.arity}, got shape {x.shape}")
    return float(phi(*x))


# -- evaluation-protocol wrappers ---------------------------------------


@dataclass(frozen=True)
class NegatedFunction:
    """-phi, with the convexity tag flipped.  Evaluation protocol only."""

    base: object

    @property
    def arity(self):
        return self.base.arity

    @property
    def growth_order(self):
        return self.base.growth_order

    @property
    def convexity(self):
        tag = self.base.convexity
        if tag == CONVEX:
            return CONCAVE
        if tag == CONCAVE:
            return CONVEX
        return tag

    def kink_points(self):
        getter = getattr(self.base, "kink_points", None)
        return tuple(getter()) if getter is not None else ()

    def __call__(self, *args):
        return -self.base(*args)


@dataclass(frozen=True)
class SwappedFunction:
    """phi with its two arguments exchanged."""

    base: object

    def __post_init__(self):
        if self.base.arity != 2:
            raise ValueError("argument swap is defined for bivariate functions")

    arity = 2

    @property
    def growth_order(self):
        return self.base.growth_order

    @property
    def convexity(self):
        return self.base.convexity

    def __call__(self, x1, x2):
        return self.base(x2, x1)


# -- convexity verification ----------------------------------------------


@dataclass(frozen=True)
class ConvexityReport:
    consistent: bool
    witness: tuple | None = None


def convexity_check(
    phi,
    sample_count: int = 1000,
    rng: RngStream = RngStream(0),
    box_halfwidth: float = 4.0,
    tol: float = 1e-9,
) -> ConvexityReport:
    """Randomised midpoint test of a declared convex/concave tag.

    Draws ``sample_count`` point pairs from a centred box and checks
    ``phi((x+y)/2) <= (phi(x)+phi(y))/2`` (reversed for concave).  Returns
    the first violating pair, if any.
    """
    if phi.convexity not in (CONVEX, CONCAVE):
        raise ValueError("convexity_check needs a convex or concave tag")
    gen = rng.generator()
    d = phi.arity
    xs = gen.uniform(-box_halfwidth, box_halfwidth, size=(sample_count, d))
    ys = gen.uniform(-box_halfwidth, box_halfwidth, size=(sample_count, d))
    mids = 0.5 * (xs + ys)
    fx = phi(*xs.T)
    fy = phi(*ys.T)
    fm = phi(*mids.T)
    slack = tol * (1.0 + np.abs(fx) + np.abs(fy))
    if phi.convexity == CONVEX:
        bad = fm > 0.5 * (fx + fy) + slack
    else:
        bad = fm < 0.5 * (fx + fy) - slack
    idx = np.flatnonzero(bad)
    if idx.size:
        i = int(idx[0])
        return ConvexityReport(consistent=False, witness=(tuple(xs[i]), tuple(ys[i])))
    return ConvexityReport(consistent=True)
