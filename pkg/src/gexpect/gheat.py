"""Finite-difference oracle for the nonlinear heat equation.

Solves u_t = G(u_xx) with G(a) = (sigma_hi^2 a+ - sigma_lo^2 a-) / 2 (the
Black-Scholes-Barenblatt flux) by explicit Euler in time and central second
differences in space.  ``u(t, 0)`` with initial condition ``phi``
approximates the G-normal upper expectation of ``phi(sqrt(t) X)``, which
makes this solver an oracle for the backward-recursion engine: the two
share no code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .griddp import GridFunction
from .maximal import VarianceBand
from .quadrature import gauss_hermite, normal_expectation_batch

_BLOWUP = 1e12


@dataclass(frozen=True)
class PdeConfig:
    """Domain and scheme parameters for one solve.

    The explicit scheme is stable iff dt <= dx^2 / sigma_hi^2 (checked);
    dt is rounded down so the horizon is an integral number of steps.
    Spatial boundaries use tangent-extrapolation ghost values, i.e. a zero
    second difference at the outermost nodes.
    """

    band: VarianceBand
    x_halfwidth: float
    dx: float
    t_final: float = 1.0
    dt: float | None = None

    def __post_init__(self):
        if self.dx <= 0 or self.x_halfwidth <= 0 or self.t_final <= 0:
            raise ValueError("x_halfwidth, dx and t_final must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")

    @classmethod
    def for_band(cls, band: VarianceBand, t_final: float = 1.0, points: int = 1601,
                 halfwidth: float | None = None, cfl_fraction: float = 0.5) -> "PdeConfig":
        """Default domain: halfwidth 8 * sigma_hi * sqrt(t), dt at half CFL."""
        if halfwidth is None:
            halfwidth = 8.0 * max(band.sigma_hi, 1e-12) * math.sqrt(t_final)
        dx = 2.0 * halfwidth / (points - 1)
        dt = cfl_fraction * dx * dx / max(band.sigma_hi**2, 1e-300)
        return cls(band=band, x_halfwidth=halfwidth, dx=dx, t_final=t_final, dt=dt)

    def resolve_steps(self):
        """(dt, n_steps) with dt adjusted to divide t_final exactly."""
        max_dt = self.dx**2 / max(self.band.sigma_hi**2, 1e-300)
        dt = self.dt if self.dt is not None else 0.5 * max_dt
        if dt > max_dt * (1 + 1e-12):
            raise ValueError(
                f"explicit scheme unstable: dt={dt:.3e} exceeds the stable limit "
                f"dx^2/sigma_hi^2 = {max_dt:.3e}"
            )
        n_steps = max(1, math.ceil(self.t_final / dt - 1e-9))
        return self.t_final / n_steps, n_steps


def g_flux(a, band: VarianceBand):
    """G(a) = (sigma_hi^2 a+ - sigma_lo^2 a-) / 2, applied elementwise."""
    a = np.asarray(a, dtype=float)
    return 0.5 * np.where(a > 0, band.sigma_hi**2 * a, band.sigma_lo**2 * a)


def solve_gheat(phi, config: PdeConfig) -> GridFunction:
    """Terminal-time slice u(t_final, .) of the nonlinear heat equation."""
    if phi.arity != 1:
        raise ValueError("the initial condition must be a scalar function")
    dt, n_steps = config.resolve_steps()
    n_points = int(round(2 * config.x_halfwidth / config.dx)) + 1
    x = np.linspace(-config.x_halfwidth, config.x_halfwidth, n_points)
    dx = x[1] - x[0]
    u = np.asarray(phi(x), dtype=float)
    d2 = np.zeros_like(u)
    inv_dx2 = 1.0 / (dx * dx)
    for _ in range(n_steps):
        d2[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) * inv_dx2
        # ghost values continue the boundary tangent, so the boundary
        # second difference vanishes
        d2[0] = 0.0
        d2[-1] = 0.0
        u = u + dt * g_flux(d2, config.band)
        if not np.isfinite(u).all() or np.abs(u).max() > _BLOWUP:
            raise NumericError("finite-difference solution blew up; refine dt or the domain")
    return GridFunction(x_lo=float(x[0]), x_hi=float(x[-1]), values=u, interp="linear")


def value_at_origin(phi, config: PdeConfig) -> float:
    """u(t_final, 0); the grid always contains the origin for odd sizes."""
    slice_ = solve_gheat(phi, config)
    return float(slice_(0.0))


@dataclass(frozen=True)
class CollapseReport:
    max_deviation: float
    sigma_used: float
    window: float


def convexity_collapse_check(phi, config: PdeConfig, order: int = 80) -> CollapseReport:
    """Deviation of the nonlinear solve from the matching classical heat flow.

    For a convex initial condition the nonlinear flux always sees a
    nonnegative second derivative, so the solution must match the
    classical heat solution at the top of the band; concave, at the
    bottom.  The classical side is computed by Gaussian quadrature.  The
    deviation is taken over the central half of the domain, where the
    frozen-boundary error of the scheme is negligible.
    """
    from .testfuncs import CONCAVE, CONVEX

    if phi.convexity == CONVEX:
        sigma = config.band.sigma_hi
    elif phi.convexity == CONCAVE:
        sigma = config.band.sigma_lo
    elif config.band.degenerate:
        sigma = config.band.sigma_lo
    else:
        raise ValueError("collapse check needs a convex or concave tag (or a degenerate band)")
    slice_ = solve_gheat(phi, config)
    x = slice_.grid
    window = 0.5 * config.x_halfwidth
    mask = np.abs(x) <= window
    rule = gauss_hermite(order)
    scale = sigma * math.sqrt(config.t_final)
    classical = normal_expectation_batch(phi, x[mask], scale, rule)
    deviation = float(np.max(np.abs(slice_.values[mask] - classical)))
    return CollapseReport(max_deviation=deviation, sigma_used=sigma, window=window)
