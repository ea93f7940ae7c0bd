"""Steady states, entropy integrands and entropy minimizers.

The drift-diffusion model under study has the one-parameter family of steady
states

    f(v) = (exp(gamma * (|v|^2/2 + theta)) - 1)^(-1/gamma),   theta >= 0,

on the centred ball of radius ``r1``.  The limiting profile at ``theta = 0``
diverges like ``c_gamma * |v|^(-2/gamma)`` at the origin; its mass (the
critical mass) is finite exactly when ``gamma > 2/dim``.  Above the critical
mass the entropy minimizer carries a point mass at the origin on top of the
limiting profile.

Masses follow the radial convention: for ``dim == 1`` the plain integral over
``[-r1, r1]``, for ``dim >= 2`` the integral over the ball divided by the
surface area of the unit sphere, i.e. ``int_0^r1 f(r) r^(dim-1) dr``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "ModelParams",
    "MinimizerSpec",
    "SingularSteadyStateError",
    "SupercriticalMassError",
    "steady_state_density",
    "critical_mass",
    "theta_for_mass",
    "entropy_minimizer",
    "mob",
    "phi",
    "phi_prime",
    "psi",
    "psi_fast",
    "blowup_prefactor",
]

# Radius (relative to r1) below which the limiting profile is integrated
# analytically; plain quadrature loses accuracy against the |v|^(-2/gamma)
# singularity.
_SINGULAR_SPLIT = 1e-3


class SingularSteadyStateError(ValueError):
    """Evaluation of the limiting steady state at its singular point."""


class SupercriticalMassError(ValueError):
    """A smooth steady state was requested for a mass at or above critical."""


@dataclass(frozen=True)
class ModelParams:
    """Nonlinearity exponent, dimension and domain radius of one problem."""

    gamma: float
    dim: int = 1
    r1: float = 1.0

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.r1 <= 0:
            raise ValueError(f"r1 must be positive, got {self.r1}")
        if self.dim == 1 and self.gamma <= 2:
            warnings.warn(
                "the 1D evolution scheme targets the supercritical regime "
                f"gamma > 2; got gamma = {self.gamma}",
                stacklevel=2,
            )


@dataclass(frozen=True)
class MinimizerSpec:
    """Entropy minimizer for a given mass.

    Either a smooth steady state (``theta > 0``, ``dirac_mass == 0``) or the
    limiting profile plus a point mass ``dirac_mass = mass - critical mass``
    at the origin (``theta == 0``).
    """

    theta: float
    dirac_mass: float
    params: ModelParams
    total_mass: float

    def __post_init__(self) -> None:
        if self.theta < 0 or self.dirac_mass < 0:
            raise ValueError("theta and dirac_mass must be nonnegative")
        if self.theta > 0 and self.dirac_mass > 0:
            raise ValueError("a smooth minimizer cannot carry a point mass")
        if self.total_mass <= 0:
            raise ValueError("total_mass must be positive")
        if self.dirac_mass > self.total_mass:
            raise ValueError("dirac_mass exceeds total mass")


def blowup_prefactor(gamma: float) -> float:
    """Coefficient of the |v|^(-2/gamma) leading term of the limiting profile."""
    return (2.0 / gamma) ** (1.0 / gamma)


def steady_state_density(theta, gamma, v_abs):
    """Evaluate the steady state at radius ``v_abs``; vectorized in ``v_abs``.

    Raises :class:`SingularSteadyStateError` when ``theta == 0`` and any
    requested radius is zero (the limiting profile diverges there).
    """
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    v = np.asarray(v_abs, dtype=float)
    if theta == 0.0 and np.any(v == 0.0):
        raise SingularSteadyStateError(
            "the limiting steady state diverges at the origin"
        )
    x = gamma * (0.5 * v * v + theta)
    # expm1 overflows past ~709; the tail is exp(-x/gamma) to machine accuracy
    # well before that.  Arguments so small that x underflows to zero produce
    # inf, the correct limit.
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(
            x < 500.0,
            np.power(np.expm1(np.minimum(x, 500.0)), -1.0 / gamma),
            np.exp(-x / gamma),
        )
    if np.ndim(v_abs) == 0:
        return float(out)
    return out


def _mass_integral(theta: float, params: ModelParams) -> float:
    """Mass of the steady state in the module's radial convention."""
    gamma, dim, r1 = params.gamma, params.dim, params.r1

    def integrand(r):
        return steady_state_density(theta, gamma, r) * r ** (dim - 1)

    if theta > 0.0:
        val, err = integrate.quad(
            integrand, 0.0, r1, epsabs=1e-12, epsrel=1e-12, limit=200
        )
        total = val
    else:
        # Split off [0, r0]: there f ~ c_gamma r^(-2/gamma) (1 - r^2/4 + ...),
        # integrated in closed form.
        r0 = _SINGULAR_SPLIT * r1
        c = blowup_prefactor(gamma)
        p = dim - 2.0 / gamma
        inner = c * (r0**p / p - r0 ** (p + 2.0) / (4.0 * (p + 2.0)))
        val, err = integrate.quad(
            integrand, r0, r1, epsabs=1e-12, epsrel=1e-12, limit=200
        )
        total = inner + val
    if not math.isfinite(total) or err > 1e-8 * max(1.0, abs(total)):
        # Fallback composite rule on 2^16 panels (plus the analytic inner
        # piece in the singular case).
        lo = _SINGULAR_SPLIT * r1 if theta == 0.0 else 0.0
        r = np.linspace(lo, r1, 2**16 + 1)
        f = integrand(np.maximum(r, 1e-300))
        total = float(integrate.simpson(f, x=r))
        if theta == 0.0:
            total += inner
    scale = 2.0 if dim == 1 else 1.0  # symmetric interval vs radial convention
    return scale * total


@lru_cache(maxsize=None)
def _critical_mass_cached(params: ModelParams) -> float:
    if params.gamma <= 2.0 / params.dim:
        return math.inf
    return _mass_integral(0.0, params)


def critical_mass(params: ModelParams) -> float:
    """Mass of the limiting steady state; ``inf`` when ``gamma <= 2/dim``."""
    return _critical_mass_cached(params)


def theta_for_mass(mass: float, params: ModelParams) -> float:
    """Invert the strictly decreasing map theta -> mass of the steady state.

    The result satisfies ``|mass(theta) - mass| < 1e-10 * mass``.  Raises
    :class:`SupercriticalMassError` at or above the critical mass (the
    comparison uses the stored critical mass, so the boundary case is
    deterministic).
    """
    if mass <= 0:
        raise ValueError(f"mass must be positive, got {mass}")
    m_c = critical_mass(params)
    if mass >= m_c:
        raise SupercriticalMassError(
            f"mass {mass} is supercritical (critical mass {m_c}); "
            "no smooth steady state exists"
        )

    def gap(theta: float) -> float:
        if theta == 0.0:
            return m_c - mass
        return _mass_integral(theta, params) - mass

    hi = 1.0
    while gap(hi) > 0.0:
        hi *= 2.0
        if hi > 1e8:
            raise RuntimeError("failed to bracket theta")
    theta = optimize.brentq(gap, 0.0, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    residual = abs(_mass_integral(theta, params) - mass)
    if residual > 1e-10 * mass:
        raise RuntimeError(
            f"theta_for_mass did not meet tolerance: |dm| = {residual:.3e}"
        )
    return theta


def entropy_minimizer(mass: float, params: ModelParams) -> MinimizerSpec:
    """Entropy minimizer of the given mass.

    Below the critical mass this is the smooth steady state; at or above it,
    the limiting profile plus the excess mass concentrated at the origin
    (exactly critical mass: ``theta = 0`` with zero point mass).
    """
    if mass <= 0:
        raise ValueError(f"mass must be positive, got {mass}")
    m_c = critical_mass(params)
    if mass < m_c:
        return MinimizerSpec(
            theta=theta_for_mass(mass, params),
            dirac_mass=0.0,
            params=params,
            total_mass=mass,
        )
    return MinimizerSpec(
        theta=0.0, dirac_mass=mass - m_c, params=params, total_mass=mass
    )


def mob(s, gamma):
    """Mobility s (1 + s^gamma) of the nonlinear continuity equation."""
    s = np.asarray(s, dtype=float)
    return s * (1.0 + s**gamma)


# --- internal-energy integrand -------------------------------------------
#
# phi(f) = (1/gamma) int_0^f log(s^gamma / (1 + s^gamma)) ds.  Integrating by
# parts gives the closed form
#
#     phi(f) = f log f - (f/gamma) log(1 + f^gamma) - I(f),
#     I(f)   = int_0^f (1 + s^gamma)^(-1) ds = f 2F1(1, 1/gamma; 1+1/gamma; -f^gamma),
#
# which is exact for every gamma > 0.  For gamma > 1 and large f the
# hypergeometric argument is astronomically negative, so the tail expansion
#
#     phi(f) = -C + f^(1-gamma)/(gamma(gamma-1)) - f^(1-2gamma)/(2gamma(2gamma-1)) + ...
#
# with C = pi / (gamma sin(pi/gamma)) takes over.


def _phi_gamma1(f: np.ndarray) -> np.ndarray:
    # f log f - (1+f) log(1+f), written to stay accurate for huge f; below
    # the normal range 1/f overflows, where f (log f - 1) is exact enough.
    out = np.zeros_like(f)
    pos = (f >= 1e-300) & np.isfinite(f)
    fp = f[pos]
    out[pos] = -fp * np.log1p(1.0 / fp) - np.log1p(fp)
    tiny = (f > 0) & (f < 1e-300)
    ft = f[tiny]
    out[tiny] = ft * (np.log(ft) - 1.0)
    out[np.isinf(f)] = -np.inf
    return out


def _phi_general(f: np.ndarray, gamma: float) -> np.ndarray:
    out = np.zeros_like(f)
    pos = f > 0
    fp = f[pos]
    res = np.empty_like(fp)
    # keep |f^gamma| moderate for the hypergeometric evaluation
    switch = 10.0 ** (8.0 / gamma) if gamma > 1.0 else np.inf
    small = fp <= switch
    fs = fp[small]
    z = -(fs**gamma)
    res[small] = (
        special.xlogy(fs, fs)
        - (fs / gamma) * np.log1p(fs**gamma)
        - fs * special.hyp2f1(1.0, 1.0 / gamma, 1.0 + 1.0 / gamma, z)
    )
    if np.any(~small):
        fb = fp[~small]
        c_inf = math.pi / (gamma * math.sin(math.pi / gamma))
        res[~small] = (
            -c_inf
            + fb ** (1.0 - gamma) / (gamma * (gamma - 1.0))
            - fb ** (1.0 - 2.0 * gamma) / (2.0 * gamma * (2.0 * gamma - 1.0))
        )
    out[pos] = res
    return out


def phi(f, gamma):
    """Internal-energy integrand; phi(0) = 0 and phi <= 0 on [0, inf)."""
    arr = np.asarray(f, dtype=float)
    if np.any(arr < 0):
        raise ValueError("phi is defined for nonnegative arguments")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = _phi_gamma1(arr) if gamma == 1.0 else _phi_general(arr, gamma)
    return float(out[0]) if scalar else out


def phi_prime(f, gamma):
    """d(phi)/df = (1/gamma) log(f^gamma / (1 + f^gamma))."""
    f = np.asarray(f, dtype=float)
    return np.log(f) - np.log1p(f**gamma) / gamma


def psi(s, gamma, dim: int = 1):
    """Convex integrand of the transported entropy: psi(s) = s phi(1/s).

    ``psi(0) = 0`` by continuous extension (phi is sublinear).  ``dim``
    rescales the argument, psi_d(s) = psi(s/dim), matching the radial
    entropy.
    """
    arr = np.asarray(s, dtype=float) / float(dim)
    if np.any(arr < 0):
        raise ValueError("psi is defined for nonnegative arguments")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if gamma == 1.0:
        # psi and phi coincide at gamma = 1 (s phi(1/s) collapses to phi(s))
        out = _phi_gamma1(arr)
        return float(out[0]) if scalar else out
    out = np.zeros_like(arr)
    pos = arr >= 1e-300
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = arr[pos] * phi(1.0 / arr[pos], gamma)
    tiny = (arr > 0) & ~pos
    if np.any(tiny) and gamma > 1.0:
        c_inf = math.pi / (gamma * math.sin(math.pi / gamma))
        st = arr[tiny]
        out[tiny] = -c_inf * st + st**gamma / (gamma * (gamma - 1.0))
    return float(out[0]) if scalar else out


@lru_cache(maxsize=8)
def _psi_spline(gamma: float):
    """Cubic-spline surrogate of psi on a log grid, for hot loops."""
    from scipy.interpolate import CubicSpline

    lo, hi = 1e-8, 1e8
    xi = np.linspace(math.log(lo), math.log(hi), 65537)
    values = psi(np.exp(xi), gamma)
    return CubicSpline(xi, values), lo, hi


def psi_fast(gamma: float, dim: int = 1):
    """Vectorized evaluator for psi_d, cheap enough for per-step entropies.

    gamma == 1 uses the closed form; otherwise a cached spline with the
    asymptotic tails -C s + s^gamma/(gamma(gamma-1)) (s -> 0) and
    -log s - 1 - s^(-gamma)/(gamma(gamma+1)) (s -> inf).
    """
    d = float(dim)
    if gamma == 1.0:

        def eval_gamma1(s):
            arr = np.asarray(s, dtype=float) / d
            return _phi_gamma1(np.atleast_1d(arr))  # psi == phi when gamma=1

        return eval_gamma1

    spline, lo, hi = _psi_spline(gamma)
    c_inf = math.pi / (gamma * math.sin(math.pi / gamma))

    def evaluate(s):
        arr = np.atleast_1d(np.asarray(s, dtype=float)) / d
        out = np.zeros_like(arr)
        mid = (arr >= lo) & (arr <= hi)
        out[mid] = spline(np.log(arr[mid]))
        tiny = (arr > 0) & (arr < lo)
        if np.any(tiny):
            st = arr[tiny]
            out[tiny] = -c_inf * st + st**gamma / (gamma * (gamma - 1.0))
        big = arr > hi
        if np.any(big):
            sb = arr[big]
            out[big] = -np.log(sb) - 1.0 - sb ** (-gamma) / (gamma * (gamma + 1.0))
        return out

    return evaluate
