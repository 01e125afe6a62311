"""Radial initial-value solver and exhaustion-potential construction.

The radial problem ``[g^{m-1} phi(c z')]' = g^{m-1} B(c z)`` with
``z(R) = theta, z'(R) = mu`` is solved by fixed-point (Picard) iteration of
its integral reformulation on short windows, continued window by window.
Solutions either reach the requested radius or blow up at a finite radius,
which is detected and bracketed.  On top of the solver sit the slope
selection rules and the small-on-an-annulus construction that produce
exhaustion potentials for triples of concentric balls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .core import (DomainError, ModelManifold, NumericError, PhiOperator,
                   PotentialB, phi_inverse, phi_inverse_array)

COMPLETE = "complete"
BLOWUP = "blowup"


def _cumint(y, x):
    """Cumulative integral on a shared grid; higher-order rule when the
    window has enough nodes (the trapezoid floor keeps 2-node windows
    working during continuation restarts)."""
    if len(x) >= 3:
        return cumulative_simpson(y, x=x, initial=0.0)
    return cumulative_trapezoid(y, x, initial=0.0)


class PicardNoConvergence(NumericError):
    """Fixed-point iteration failed on the requested interval."""


class EvansFailure(NumericError):
    """The small-annulus construction could not accept any scale."""

    def __init__(self, message: str, observed_sup: float = math.nan,
                 blowup_radius: Optional[float] = None):
        super().__init__(message)
        self.observed_sup = observed_sup
        self.blowup_radius = blowup_radius


@dataclass(frozen=True)
class CauchyParams:
    R: float
    theta: float
    mu: float
    c: float

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("base radius R must be positive")
        if self.theta < 0:
            raise ValueError("initial value theta must be >= 0")
        if self.mu <= 0:
            raise ValueError("initial slope mu must be positive")
        if not 0.0 < self.c <= 1.0:
            raise ValueError("scale c must lie in (0, 1]")


@dataclass(frozen=True)
class RadialSolution:
    grid: np.ndarray
    z: np.ndarray
    zp: np.ndarray
    params: CauchyParams
    status: str                      # COMPLETE or BLOWUP
    r_max: float                     # reached radius (COMPLETE)
    blowup_radius: Optional[float] = None

    def sup_on(self, a: float, b: float) -> float:
        mask = (self.grid >= a) & (self.grid <= b)
        if not np.any(mask):
            raise DomainError("no solution nodes in the requested interval")
        return float(np.max(self.z[mask]))

    def to_csv(self) -> str:
        lines = ["r,z,zp"]
        for r, z, zp in zip(self.grid, self.z, self.zp):
            lines.append(f"{r:.12g},{z:.12g},{zp:.12g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EvansResult:
    solution: RadialSolution
    c_final: float
    mu_final: float
    sup_on_annulus: float
    K_bound: float

    def to_csv(self) -> str:
        head = [f"# c={self.c_final:.12g}",
                f"# mu={self.mu_final:.12g}",
                f"# sup_on_annulus={self.sup_on_annulus:.12g}",
                f"# status={self.solution.status}",
                "r,w"]
        c = self.c_final
        for r, z in zip(self.solution.grid, self.solution.z):
            head.append(f"{r:.12g},{c * z:.12g}")
        return "\n".join(head) + "\n"


def volterra_apply(M: ModelManifold, op: PhiOperator, pot: PotentialB,
                   params: CauchyParams, grid: np.ndarray,
                   u: np.ndarray) -> np.ndarray:
    """One application of the integral-reformulation operator.

    ``T(u)(t) = theta + (1/c) * int_R^t phi^-1( w(R) phi(c mu)/w(s)
    + int_R^s (w(tau)/w(s)) B(c u(tau)) dtau ) ds`` with
    ``w = g**(m-1)``; both cumulative integrals use a composite
    higher-order rule on the shared grid.
    """
    grid = np.asarray(grid, dtype=float)
    u = np.asarray(u, dtype=float)
    if grid.shape != u.shape:
        raise ValueError("grid and samples must have matching shapes")
    if np.any(u < 0):
        raise DomainError("samples must be nonnegative")
    w = np.asarray(M.g(grid), dtype=float) ** (M.m - 1)
    c = params.c
    with np.errstate(over="ignore", invalid="ignore"):
        head = w[0] * float(op.phi(c * params.mu)) / w
        inner = _cumint(w * np.asarray(pot(c * u), dtype=float), grid) / w
        if not np.all(np.isfinite(head + inner)):
            raise PicardNoConvergence("flux overflow; shrink the interval")
        # the composite rule can undershoot on steep data; the true flux
        # of a nonnegative source never drops below zero
        slope = phi_inverse_array(op, np.maximum(head + inner, 0.0))
        return params.theta + np.maximum(_cumint(slope, grid), 0.0) / c


def solve_on_interval(M: ModelManifold, op: PhiOperator, pot: PotentialB,
                      params: CauchyParams, r_end: float,
                      tol: float = 1e-10, max_iter: int = 200,
                      n_nodes: int = 64) -> np.ndarray:
    """Fixed-point samples on ``[R, r_end]``; raises on non-convergence."""
    if r_end <= params.R:
        raise DomainError("r_end must exceed the base radius")
    grid = np.linspace(params.R, r_end, n_nodes)
    u = np.full(n_nodes, params.theta)
    for _ in range(max_iter):
        v = volterra_apply(M, op, pot, params, grid, u)
        if not np.all(np.isfinite(v)):
            raise PicardNoConvergence(
                "iteration produced non-finite values; shrink the interval")
        delta = float(np.max(np.abs(v - u)))
        u = v
        if delta <= tol:
            return u
    raise PicardNoConvergence(
        f"no fixed point within {max_iter} iterations (last change "
        f"{delta:.3e}); shrink the interval")


def _window_derivatives(M, op, pot, params, grid, z):
    """Slope samples from the integrated form of the equation.

    Avoids numerical differentiation of ``z``: the flux ``w phi(c z')``
    equals its initial value plus the accumulated source term exactly.
    """
    w = np.asarray(M.g(grid), dtype=float) ** (M.m - 1)
    c = params.c
    inner = _cumint(w * np.asarray(pot(c * z), dtype=float), grid)
    flux = (w[0] * float(op.phi(c * params.mu)) + inner) / w
    return phi_inverse_array(op, np.maximum(flux, 0.0)) / c


def solve_cauchy(M: ModelManifold, op: PhiOperator, pot: PotentialB,
                 params: CauchyParams, R_max: float,
                 blowup_threshold: float = 1e8,
                 nodes_per_window: int = 64,
                 tol: float = 1e-10) -> RadialSolution:
    """March the radial problem to ``R_max`` by window continuation.

    Each window is solved by fixed-point iteration; the restart state
    ``(theta, mu)`` comes from the integrated flux identity.  Windows halve
    on non-convergence; crossing ``blowup_threshold`` reports a finite
    blow-up radius bracketed by the last grid cell.
    """
    if R_max <= params.R:
        raise DomainError("R_max must exceed the base radius")
    base_window = min(1.0, (R_max - params.R) / 16.0)
    window = base_window
    min_window = 1e-8 * params.R

    grids = [np.array([params.R])]
    zs = [np.array([params.theta])]
    zps = [np.array([params.mu])]
    cur = CauchyParams(params.R, params.theta, params.mu, params.c)

    while cur.R < R_max:
        r_end = min(cur.R + window, R_max)
        try:
            grid = np.linspace(cur.R, r_end, nodes_per_window)
            z = solve_on_interval(M, op, pot, cur, r_end, tol=tol,
                                  n_nodes=nodes_per_window)
        except PicardNoConvergence:
            window *= 0.5
            if window < min_window:
                if float(zs[-1][-1]) > 1e3 * max(1.0, params.theta + 1.0):
                    rho = cur.R + 0.5 * window
                    return _assemble(grids, zs, zps, params, BLOWUP,
                                     cur.R, rho)
                raise NumericError(
                    "window underflow without blow-up signature")
            continue
        zp = _window_derivatives(M, op, pot, cur, grid, z)
        over = np.nonzero(z > blowup_threshold)[0]
        if len(over) > 0:
            k = int(over[0])
            cut = max(k, 1)
            rho = 0.5 * (grid[max(k - 1, 0)] + grid[k])
            grids.append(grid[1:cut + 1])
            zs.append(z[1:cut + 1])
            zps.append(zp[1:cut + 1])
            return _assemble(grids, zs, zps, params, BLOWUP, grid[cut], rho)
        grids.append(grid[1:])
        zs.append(z[1:])
        zps.append(zp[1:])
        cur = CauchyParams(r_end, float(z[-1]), float(zp[-1]), params.c)
        window = min(window * 2.0, base_window)

    return _assemble(grids, zs, zps, params, COMPLETE, R_max, None)


def _assemble(grids, zs, zps, params, status, r_reached, rho):
    return RadialSolution(
        grid=np.concatenate(grids), z=np.concatenate(zs),
        zp=np.concatenate(zps), params=params, status=status,
        r_max=float(r_reached), blowup_radius=rho)


def choose_mu(op: PhiOperator, c: float) -> float:
    """Largest slope keeping the scaled initial flux below ``c**(p-1)``.

    This is the choice that makes the sup of the solution on a fixed
    annulus uniformly bounded in ``c``.
    """
    if not 0.0 < c <= 1.0:
        raise DomainError("choose_mu requires c in (0, 1]")
    return phi_inverse(op, c ** (op.p - 1.0)) / c


def evans_for_triple(M: ModelManifold, op: PhiOperator, pot: PotentialB,
                     R: float, R1: float, eps: float, R_max: float,
                     blowup_threshold: float = 1e8,
                     nodes_per_window: int = 64,
                     c_min: float = 1e-12) -> EvansResult:
    """Exhaustion solution small on the annulus ``[R, R1]``.

    Halves the scale ``c`` from 1, picking the matched slope each time,
    until the scaled solution stays below ``eps`` on the annulus.  Requires
    a monotone warping and a potential with a ``t**(p-1)`` upper bound
    (otherwise solutions blow up and no scale can be accepted).
    """
    if not (0 < R < R1 < R_max):
        raise DomainError("need 0 < R < R1 < R_max")
    if eps <= 0:
        raise DomainError("eps must be positive")
    if pot.b1 is None:
        raise DomainError(
            "potential lacks a t**(p-1) upper bound; the uniform sup bound "
            "does not apply")
    if not M.monotone:
        raise DomainError("the construction requires a non-decreasing warping")
    c = 1.0
    while c >= c_min:
        mu = choose_mu(op, c)
        params = CauchyParams(R=R, theta=0.0, mu=mu, c=c)
        sol = solve_cauchy(M, op, pot, params, R_max,
                           blowup_threshold=blowup_threshold,
                           nodes_per_window=nodes_per_window)
        if sol.status == BLOWUP:
            raise EvansFailure(
                f"solution blows up at radius {sol.blowup_radius:.6g}; the "
                "potential violates the growth condition",
                blowup_radius=sol.blowup_radius)
        K_obs = sol.sup_on(R, R1)
        sup = c * K_obs
        if sup < eps:
            if np.any(np.diff(sol.z) <= 0):
                raise NumericError("accepted solution is not increasing")
            return EvansResult(solution=sol, c_final=c, mu_final=mu,
                               sup_on_annulus=sup, K_bound=K_obs)
        c *= 0.5
    raise EvansFailure(
        "no admissible scale above the floor; observed annulus bound "
        f"{sup:.6g}", observed_sup=sup)


def non_overlap_mu(M: ModelManifold, op: PhiOperator, w_prime_R: float,
                   R: float, R_hat: float, c: float) -> float:
    """Slope making an inner solution started at ``R_hat`` stay below an
    outer solution started at ``R`` (strict flux comparison, factor 1/2)."""
    if not (0 < R < R_hat):
        raise DomainError("need 0 < R < R_hat")
    if w_prime_R <= 0:
        raise DomainError("outer slope must be positive")
    wR = float(M.g(R)) ** (M.m - 1)
    wHat = float(M.g(R_hat)) ** (M.m - 1)
    y = 0.5 * wR * float(op.phi(w_prime_R)) / wHat
    return phi_inverse(op, y) / c


def ode_residual(M: ModelManifold, op: PhiOperator, pot: PotentialB,
                 sol: RadialSolution) -> float:
    """Max normalized defect of the flux-form equation at interior nodes."""
    if sol.status != COMPLETE:
        raise DomainError("residual is defined for completed solutions")
    r, z, zp = sol.grid, sol.z, sol.zp
    c = sol.params.c
    w = np.asarray(M.g(r), dtype=float) ** (M.m - 1)
    flux = w * np.asarray(op.phi(c * zp), dtype=float)
    dflux = (flux[2:] - flux[:-2]) / (r[2:] - r[:-2])
    rhs = (w * np.asarray(pot(c * z), dtype=float))[1:-1]
    return float(np.max(np.abs(dflux - rhs) / (1.0 + rhs)))
