"""Rotationally symmetric manifolds, gradient nonlinearities and potentials.

Everything downstream (integral classifiers, the radial solver, the
discrete variational-inequality pipeline) consumes the three immutable
descriptors defined here:

* ``ModelManifold``   -- dimension ``m`` and warping function ``g`` of the
  metric ``dr^2 + g(r)^2 dtheta^2``;
* ``PhiOperator``     -- the gradient nonlinearity ``phi`` pinched between
  multiples of ``t**(p-1)``;
* ``PotentialB``      -- the non-decreasing zero-order term ``B``.

All quantities with a growth problem (volumes on fast-growing warpings)
are exposed both directly and in log form, so callers can stay in the
floating-point range at large radii.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(RuntimeError):
    """A numerical procedure failed to reach its tolerance."""


class QuadratureError(NumericError):
    """Adaptive quadrature did not converge; carries the achieved estimate."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class Quadrature:
    """Adaptive panel-refinement quadrature over finite intervals."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")

    def integrate(self, f, a: float, b: float, points=None) -> float:
        if a == b:
            return 0.0
        kwargs = {"epsabs": self.abs_tol, "epsrel": self.rel_tol, "limit": 200}
        if points is not None:
            kwargs["points"] = [x for x in points if a < x < b]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            val, err = quad(f, a, b, **kwargs)
        if not math.isfinite(val):
            raise QuadratureError("non-finite quadrature result", err)
        # quad may miss the requested tolerance on hard integrands; accept a
        # generous slack because classifier margins dominate quadrature error.
        if err > 1e4 * max(self.abs_tol, self.rel_tol * abs(val)):
            raise QuadratureError("quadrature did not converge", err)
        return val


DEFAULT_QUADRATURE = Quadrature()


# ---------------------------------------------------------------------------
# model manifolds


@dataclass(frozen=True)
class ModelManifold:
    """``R^m`` with metric ``dr^2 + g(r)^2 dtheta^2``.

    ``log_g`` is an overflow-safe evaluation of ``log g(r)``; presets supply
    closed forms so volume ratios stay computable at radii where ``g`` itself
    overflows a double.
    """

    m: int
    g: Callable[[float], float]
    g_prime: Callable[[float], float]
    log_g: Callable[[float], float]
    monotone: bool = False
    name: str = "custom"
    r_max_valid: float = math.inf

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("dimension m must be >= 2")

    def _check_radius(self, r):
        if np.any(np.asarray(r) > self.r_max_valid):
            raise DomainError(
                f"radius beyond tabulated range (max {self.r_max_valid})"
            )


def sphere_volume(M: ModelManifold, r: float) -> float:
    """Boundary-sphere volume ``g(r)**(m-1)``."""
    if r <= 0:
        raise DomainError("sphere_volume requires r > 0")
    M._check_radius(r)
    return float(M.g(r)) ** (M.m - 1)


def log_sphere_volume(M: ModelManifold, r: float) -> float:
    """``log vol(dB_r)``, safe for warpings that overflow ``g`` itself."""
    if r <= 0:
        raise DomainError("log_sphere_volume requires r > 0")
    M._check_radius(r)
    return (M.m - 1) * float(M.log_g(r))


def ball_volume(M: ModelManifold, r: float,
                q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Ball volume ``integral_0^r g(t)**(m-1) dt``."""
    if r <= 0:
        raise DomainError("ball_volume requires r > 0")
    M._check_radius(r)
    return q.integrate(lambda t: M.g(t) ** (M.m - 1), 0.0, r)


def volume_ratio(M: ModelManifold, r: float, R: float = 0.0,
                 q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """``g(r)**(1-m) * integral_R^r g(t)**(m-1) dt`` computed in log space.

    The integrand ``exp(L(t) - L(r))`` with ``L = (m-1) log g`` is <= 1 for
    monotone warpings, so the ratio never overflows even when the volumes do.
    For rapidly growing ``g`` the mass concentrates near ``t = r``; the panel
    split below hands the spike to the adaptive rule explicitly.
    """
    if r < R:
        raise DomainError("volume_ratio requires r >= R")
    if r == R:
        return 0.0
    M._check_radius(r)
    Lr = log_sphere_volume(M, r)

    def f(t):
        if t <= 0.0:
            return 0.0
        return math.exp((M.m - 1) * float(M.log_g(t)) - Lr)

    lo = max(R, 0.0)
    # estimate the local decay rate of the integrand at t = r
    h = 1e-4 * r
    Lm = (M.m - 1) * float(M.log_g(r - h))
    rate = max((Lr - Lm) / h, 0.0)
    points = None
    if rate * (r - lo) > 30.0:
        delta = 1.0 / rate
        points = []
        x = r - delta
        while x > lo and len(points) < 40:
            points.append(x)
            delta *= 4.0
            x = r - delta
    return q.integrate(f, lo, r, points=points)


def _preset_euclidean():
    return (lambda r: r, lambda r: np.ones_like(np.asarray(r, dtype=float)),
            np.log)


def _log_sinh(r):
    r = np.asarray(r, dtype=float)
    # sinh r = e^r (1 - e^{-2r}) / 2, stable for all r > 0
    return r + np.log1p(-np.exp(-2.0 * r)) - math.log(2.0)


def manifold_from_tag(tag: str, m: int) -> ModelManifold:
    """Build a preset manifold from its registry tag.

    Tags: ``euclidean``, ``hyperbolic``, ``power-exp:alpha=A``.
    """
    if tag == "euclidean":
        g, gp, lg = _preset_euclidean()
        return ModelManifold(m=m, g=g, g_prime=gp, log_g=lg,
                             monotone=True, name="euclidean")
    if tag == "hyperbolic":
        return ModelManifold(
            m=m, g=np.sinh, g_prime=np.cosh, log_g=_log_sinh,
            monotone=True, name="hyperbolic")
    mm = re.fullmatch(r"power-exp:alpha=([0-9.eE+-]+)", tag)
    if mm:
        alpha = float(mm.group(1))
        if alpha <= 0:
            raise ValueError("power-exp preset requires alpha > 0")

        def g(r):
            return r * np.exp(np.asarray(r, dtype=float) ** alpha)

        def gp(r):
            r = np.asarray(r, dtype=float)
            return np.exp(r ** alpha) * (1.0 + alpha * r ** alpha)

        def lg(r):
            r = np.asarray(r, dtype=float)
            return np.log(r) + r ** alpha

        return ModelManifold(m=m, g=g, g_prime=gp, log_g=lg,
                             monotone=True, name=f"power-exp:alpha={alpha:g}")
    raise ValueError(f"unknown manifold tag {tag!r}")


def tabulated_manifold(r_samples, g_samples, m: int,
                       monotone: bool = False,
                       name: str = "tabulated") -> ModelManifold:
    """Manifold from sampled ``(r, g(r))`` pairs, monotone-cubic interpolated.

    Evaluation beyond the table raises ``DomainError``: silently extending
    the warping would corrupt every downstream criterion.
    """
    r_samples = np.asarray(r_samples, dtype=float)
    g_samples = np.asarray(g_samples, dtype=float)
    if r_samples.ndim != 1 or r_samples.shape != g_samples.shape:
        raise ValueError("r and g samples must be 1-D arrays of equal length")
    if not np.all(np.diff(r_samples) > 0):
        raise ValueError("r samples must be strictly increasing")
    if r_samples[0] > 0:
        r_samples = np.concatenate([[0.0], r_samples])
        g_samples = np.concatenate([[0.0], g_samples])
    if g_samples[0] != 0.0:
        raise ValueError("tabulated warping must satisfy g(0)=0")
    if np.any(g_samples[1:] <= 0):
        raise ValueError("tabulated warping must be positive for r > 0")
    # g'(0)=1 checked at the smallest sample to 5% only; higher-order
    # smoothness at the origin is trusted, not verified.
    slope0 = g_samples[1] / r_samples[1]
    if abs(slope0 - 1.0) > 0.05:
        raise ValueError(
            f"tabulated warping has g'(0) ~= {slope0:.4f}, expected 1 (5% tol)")
    interp = PchipInterpolator(r_samples, g_samples)
    deriv = interp.derivative()
    r_hi = float(r_samples[-1])
    if monotone and np.any(deriv(r_samples) < -1e-12):
        raise ValueError("monotone flag set but g' < 0 somewhere in the table")

    def g(r):
        return interp(r)

    def gp(r):
        return deriv(r)

    def lg(r):
        return np.log(interp(r))

    return ModelManifold(m=m, g=g, g_prime=gp, log_g=lg, monotone=monotone,
                         name=name, r_max_valid=r_hi)


def load_manifold_csv(path, m: int, monotone: bool = False) -> ModelManifold:
    """Load a two-column ``r, g(r)`` CSV (header row required)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError("manifold CSV must have exactly two columns")
    return tabulated_manifold(data[:, 0], data[:, 1], m=m, monotone=monotone,
                              name=f"table:{path}")


# ---------------------------------------------------------------------------
# gradient nonlinearities


@dataclass(frozen=True)
class PhiOperator:
    """Monotone nonlinearity ``phi`` with two-sided ``t**(p-1)`` pinching.

    ``a1 * t**(p-1) <= phi(t) <= a2 * t**(p-1)`` always; when ``derivative_pinched``
    is set, the derivative bound ``a2**-1 * t**(p-1) <= t phi'(t) <=
    a1 + a2 * t**(p-1)`` is also required (and sampled at construction).
    ``phi_inv`` may carry an analytic inverse; otherwise inversion falls
    back to safeguarded bisection seeded from the pinching bounds.
    """

    phi: Callable[[float], float]
    phi_prime: Callable[[float], float]
    p: float
    a1: float
    a2: float
    derivative_pinched: bool = False
    phi_inv: Optional[Callable[[float], float]] = None
    name: str = "custom"

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError("exponent p must be > 1")
        if self.a1 <= 0 or self.a2 <= 0:
            raise ValueError("ellipticity constants must be positive")
        t = np.logspace(-6, 3, 61)
        ph = np.array([float(self.phi(x)) for x in t])
        tp = t ** (self.p - 1.0)
        if np.any(ph < self.a1 * tp * (1 - 1e-9)) or \
           np.any(ph > self.a2 * tp * (1 + 1e-9)):
            raise ValueError("phi violates its two-sided t**(p-1) bounds")
        if np.any(np.diff(ph) <= 0):
            raise ValueError("phi must be strictly increasing")
        if self.derivative_pinched:
            dp = np.array([float(self.phi_prime(x)) for x in t])
            lo = tp / self.a2
            hi = self.a1 + self.a2 * tp
            if np.any(t * dp < lo * (1 - 1e-9)) or \
               np.any(t * dp > hi * (1 + 1e-9)):
                raise ValueError("phi' violates the derivative pinching bounds")


def p_laplacian_operator(p: float) -> PhiOperator:
    """``phi(t) = t**(p-1)``."""

    def phi(t):
        return np.asarray(t, dtype=float) ** (p - 1.0)

    def phi_prime(t):
        return (p - 1.0) * np.asarray(t, dtype=float) ** (p - 2.0)

    def phi_inv(y):
        return np.asarray(y, dtype=float) ** (1.0 / (p - 1.0))

    a2 = max(1.0, p - 1.0, 1.0 / (p - 1.0))
    return PhiOperator(phi=phi, phi_prime=phi_prime, p=p, a1=1.0,
                       a2=a2, derivative_pinched=True, phi_inv=phi_inv,
                       name=f"p-laplacian:p={p:g}")


def perturbed_operator(p: float) -> PhiOperator:
    """``phi(t) = t**(p-1) * (1 + 1/(1+t))``, a non-homogeneous exemplar."""
    if not 1.25 < p <= 5:
        raise ValueError("perturbed preset supported for p in (1.25, 5]")

    def phi(t):
        t = np.asarray(t, dtype=float)
        return t ** (p - 1.0) * (1.0 + 1.0 / (1.0 + t))

    def phi_prime(t):
        t = np.asarray(t, dtype=float)
        return ((p - 1.0) * t ** (p - 2.0) * (1.0 + 1.0 / (1.0 + t))
                - t ** (p - 1.0) / (1.0 + t) ** 2)

    a2 = max(4.0, 2.0 * (p - 1.0), 1.0 / (p - 1.25))
    return PhiOperator(phi=phi, phi_prime=phi_prime, p=p, a1=1.0, a2=a2,
                       derivative_pinched=True, name=f"perturbed:p={p:g}")


def operator_from_tag(tag: str) -> PhiOperator:
    mm = re.fullmatch(r"p-laplacian:p=([0-9.eE+-]+)", tag)
    if mm:
        return p_laplacian_operator(float(mm.group(1)))
    mm = re.fullmatch(r"perturbed:p=([0-9.eE+-]+)", tag)
    if mm:
        return perturbed_operator(float(mm.group(1)))
    raise ValueError(f"unknown operator tag {tag!r}")


def phi_inverse(op: PhiOperator, y: float, tol: float = 1e-12) -> float:
    """Solve ``phi(t) = y`` for ``t >= 0``.

    The pinching constants seed the bracket; it is widened a little to
    absorb sampled-bound slack before bisection refines the root.
    """
    if y < 0:
        raise DomainError("phi_inverse requires y >= 0")
    if y == 0.0:
        return 0.0
    if op.phi_inv is not None:
        return float(op.phi_inv(y))
    pe = 1.0 / (op.p - 1.0)
    lo = 0.5 * (y / op.a2) ** pe
    hi = 2.0 * (y / op.a1) ** pe
    for _ in range(200):
        if float(op.phi(lo)) <= y:
            break
        lo *= 0.5
    else:
        raise NumericError("phi_inverse bracket expansion failed (low side)")
    for _ in range(200):
        if float(op.phi(hi)) >= y:
            break
        hi *= 2.0
    else:
        raise NumericError("phi_inverse bracket expansion failed (high side)")
    t = brentq(lambda t: float(op.phi(t)) - y, lo, hi,
               xtol=1e-300, rtol=8.9e-16, maxiter=300)
    if abs(float(op.phi(t)) - y) > tol * (1.0 + y):
        raise NumericError("phi_inverse did not reach its tolerance")
    return float(t)


def phi_inverse_array(op: PhiOperator, y: np.ndarray) -> np.ndarray:
    """Vectorized ``phi**-1`` on a nonnegative array (bisection fallback)."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("phi_inverse requires y >= 0")
    if op.phi_inv is not None:
        return np.asarray(op.phi_inv(y), dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    if not np.any(pos):
        return out
    yp = y[pos]
    pe = 1.0 / (op.p - 1.0)
    lo = 0.25 * (yp / op.a2) ** pe
    hi = 4.0 * (yp / op.a1) ** pe
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        high = np.asarray(op.phi(mid), dtype=float) > yp
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    out[pos] = 0.5 * (lo + hi)
    return out


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class PotentialB:
    """Non-decreasing zero-order term, zero on the negative half-line.

    ``b1`` bounds ``B(t) <= b1 * t**(p-1)`` when the potential admits one
    (required by the uniform-bound step of the radial construction);
    ``homogeneity`` records the growth exponent for presets that have one.
    """

    B: Callable[[float], float]
    b1: Optional[float] = None
    homogeneity: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        t = np.linspace(0.0, 10.0, 101)
        vals = np.array([float(self.B(x)) for x in t])
        if abs(vals[0]) > 0:
            raise ValueError("potential must satisfy B(0)=0")
        if np.any(np.diff(vals) < -1e-12):
            raise ValueError("potential must be non-decreasing (sampled)")
        if np.any(vals < -1e-15):
            raise ValueError("potential must be nonnegative on [0, inf)")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, self.B(np.maximum(t, 0.0)), 0.0)


def zero_potential() -> PotentialB:
    return PotentialB(B=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                      b1=0.0, homogeneity=None, name="zero")


def linear_power_potential(p: float, lam: float) -> PotentialB:
    """``B(t) = lam * t**(p-1)``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")

    def B(t):
        return lam * np.asarray(t, dtype=float) ** (p - 1.0)

    return PotentialB(B=B, b1=lam, homogeneity=p - 1.0,
                      name=f"linear-power:p={p:g},lambda={lam:g}")


def plateau_potential(T: float, p: float) -> PotentialB:
    """``B(t) = max(t - T, 0)**(p-1)``; vanishes on ``[0, T]``."""
    if T <= 0:
        raise ValueError("plateau width T must be positive")

    def B(t):
        return np.maximum(np.asarray(t, dtype=float) - T, 0.0) ** (p - 1.0)

    return PotentialB(B=B, b1=1.0, homogeneity=p - 1.0,
                      name=f"plateau:T={T:g},p={p:g}")


def superlinear_potential(q: float) -> PotentialB:
    """``B(t) = t**q``."""
    if q <= 0:
        raise ValueError("superlinear exponent q must be positive")

    def B(t):
        return np.asarray(t, dtype=float) ** q

    return PotentialB(B=B, b1=None, homogeneity=q, name=f"superlinear:q={q:g}")


def potential_from_tag(tag: str) -> PotentialB:
    if tag == "zero":
        return zero_potential()
    mm = re.fullmatch(r"linear-power:p=([0-9.eE+-]+),lambda=([0-9.eE+-]+)", tag)
    if mm:
        return linear_power_potential(float(mm.group(1)), float(mm.group(2)))
    mm = re.fullmatch(r"plateau:T=([0-9.eE+-]+),p=([0-9.eE+-]+)", tag)
    if mm:
        return plateau_potential(float(mm.group(1)), float(mm.group(2)))
    mm = re.fullmatch(r"superlinear:q=([0-9.eE+-]+)", tag)
    if mm:
        return superlinear_potential(float(mm.group(1)))
    raise ValueError(f"unknown potential tag {tag!r}")


def beta(pot: PotentialB, t: float,
         q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Antiderivative ``integral_0^t B(s) ds``; zero for ``t <= 0``."""
    if t <= 0:
        return 0.0
    return q.integrate(lambda s: float(pot(s)), 0.0, t)


def K_mu(op: PhiOperator, mu: float, t: float,
         q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """``integral_mu^t s phi'(s) ds`` for ``t >= mu >= 0``."""
    if mu < 0:
        raise DomainError("K_mu requires mu >= 0")
    if t < mu:
        raise DomainError("K_mu requires t >= mu")
    if t == mu:
        return 0.0
    return q.integrate(lambda s: s * float(op.phi_prime(s)), mu, t)
