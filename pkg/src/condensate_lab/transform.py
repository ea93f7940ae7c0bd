"""Conversion between densities and pseudo-inverse CDF profiles.

The 1D unknown is the pseudo-inverse ``u(x)`` of the cumulative distribution
of the density on ``[-r1, r1]``; the mass coordinate ``x`` runs over
``[0, m]``.  For radial problems in dimension d >= 2 the unknown is the
normalized pseudo-inverse ``S(z) = R(z)^d`` where ``R`` inverts the radial
partial-mass function; ``z`` runs over ``[0, mbar]`` with the radial mass
convention of :mod:`condensate_lab.model`.

A condensate (point mass at the origin) appears as a flat zero segment of the
profile, so profiles with flat parts are first-class citizens here.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from .model import (
    MinimizerSpec,
    ModelParams,
    blowup_prefactor,
    steady_state_density,
)

__all__ = [
    "Grid",
    "Profile",
    "ProfileKind",
    "DensitySamples",
    "MassMismatchError",
    "InvalidDensityError",
    "inverse_cdf_from_density",
    "density_from_profile",
    "minimizer_profile",
    "density_mass",
]

#: Relative mass-consistency tolerance between a density and its target grid.
MASS_TOLERANCE = 1e-3

#: Cells whose slope falls below this are treated as condensate (omitted when
#: reconstructing densities).  Thresholds on profile *values* live in the
#: solver configuration.
CONDENSATE_SLOPE_THRESHOLD = 1e-8


class MassMismatchError(ValueError):
    """Density mass and grid mass disagree beyond tolerance."""


class InvalidDensityError(ValueError):
    """Density samples are negative or non-finite."""


class ProfileKind(Enum):
    INVERSE_CDF_1D = "inverse_cdf_1d"
    RADIAL_NORMALIZED = "radial_normalized"


@dataclass(frozen=True)
class Grid:
    """Equispaced mass grid: ``n_points`` nodes covering ``[0, mass_total]``."""

    n_points: int
    mass_total: float

    def __post_init__(self) -> None:
        if self.n_points < 3:
            raise ValueError("grid needs at least 3 points")
        if self.mass_total <= 0:
            raise ValueError("mass_total must be positive")

    @property
    def spacing(self) -> float:
        return self.mass_total / (self.n_points - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.mass_total, self.n_points)


@dataclass
class Profile:
    """Monotone grid function with pinned endpoints.

    1D: values run from ``-r1`` to ``r1``.  Radial: from ``0`` to ``r1**dim``.
    """

    kind: ProfileKind
    grid: Grid
    values: np.ndarray
    params: ModelParams

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise ValueError("values length must match the grid")

    @property
    def upper_bound(self) -> float:
        if self.kind is ProfileKind.INVERSE_CDF_1D:
            return self.params.r1
        return self.params.r1 ** self.params.dim

    @property
    def lower_bound(self) -> float:
        if self.kind is ProfileKind.INVERSE_CDF_1D:
            return -self.params.r1
        return 0.0

    def validate(self) -> None:
        v = self.values
        if not np.all(np.isfinite(v)):
            raise ValueError("profile contains non-finite values")
        if v[0] != self.lower_bound or v[-1] != self.upper_bound:
            raise ValueError(
                f"endpoints ({v[0]}, {v[-1]}) are not pinned to "
                f"({self.lower_bound}, {self.upper_bound})"
            )
        if np.any(np.diff(v) < 0):
            raise ValueError("profile values must be nondecreasing")
        if v.min() < self.lower_bound or v.max() > self.upper_bound:
            raise ValueError("profile values leave the admissible range")

    def with_values(self, values: np.ndarray) -> "Profile":
        return replace(self, values=np.asarray(values, dtype=float))


class DensitySamples(NamedTuple):
    """Point samples (position, density value) reconstructed from a profile."""

    positions: np.ndarray
    values: np.ndarray


def _check_density_samples(f: np.ndarray) -> None:
    if not np.all(np.isfinite(f)):
        raise InvalidDensityError("density returned non-finite samples")
    if np.any(f < 0):
        raise InvalidDensityError("density returned negative samples")


def _check_mass(cdf_end: float, target: float) -> None:
    if abs(cdf_end - target) > MASS_TOLERANCE * target:
        raise MassMismatchError(
            f"density mass {cdf_end:.6g} differs from grid mass "
            f"{target:.6g} by more than {MASS_TOLERANCE:.0e} relative"
        )


def density_mass(
    density: Callable[[np.ndarray], np.ndarray],
    params: ModelParams,
    n_aux: int = 2**17 + 1,
) -> float:
    """Mass of a density under the module's convention, by composite trapezoid.

    Matches the quadrature used by :func:`inverse_cdf_from_density`, so a
    grid built from this value is mass-consistent with the profile built from
    the same density.
    """
    if params.dim == 1:
        v = np.linspace(-params.r1, params.r1, n_aux)
        f = np.asarray(density(v), dtype=float)
        _check_density_samples(f)
        return float(np.trapezoid(f, v))
    r = np.linspace(0.0, params.r1, n_aux)
    g = np.asarray(density(r), dtype=float)
    _check_density_samples(g)
    return float(np.trapezoid(g * r ** (params.dim - 1), r))


def inverse_cdf_from_density(
    density: Callable[[np.ndarray], np.ndarray],
    params: ModelParams,
    grid: Grid,
    aux_factor: int = 10,
) -> Profile:
    """Discretize the (normalized radial) pseudo-inverse CDF of a density.

    The CDF is accumulated by composite trapezoid on an auxiliary mesh with
    ``aux_factor`` times the target resolution and inverted by monotone
    piecewise-linear interpolation at the equispaced mass nodes.  For
    ``dim >= 2`` the normalized partial mass N(s) = (1/d) int_0^s g(q^(1/d)) dq
    is accumulated on a uniform s-mesh over [0, r1^d] and inverted the same
    way.  Endpoints are pinned exactly.

    The density's mass must match ``grid.mass_total`` to 0.1% relative; the
    accumulated CDF is then rescaled to the grid mass so the inversion is
    well defined up to the last node.
    """
    n_aux = aux_factor * (grid.n_points - 1) + 1
    if params.dim == 1:
        v = np.linspace(-params.r1, params.r1, n_aux)
        f = np.asarray(density(v), dtype=float)
        _check_density_samples(f)
        cdf = np.concatenate(
            ([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(v)))
        )
        _check_mass(cdf[-1], grid.mass_total)
        cdf *= grid.mass_total / cdf[-1]
        values = np.interp(grid.nodes(), cdf, v)
        values[0] = -params.r1
        values[-1] = params.r1
        return Profile(ProfileKind.INVERSE_CDF_1D, grid, values, params)

    d = params.dim
    s = np.linspace(0.0, params.r1**d, n_aux)
    g = np.asarray(density(s ** (1.0 / d)), dtype=float)
    _check_density_samples(g)
    cdf = np.concatenate(
        ([0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(s)))
    ) / d
    _check_mass(cdf[-1], grid.mass_total)
    cdf *= grid.mass_total / cdf[-1]
    values = np.interp(grid.nodes(), cdf, s)
    values[0] = 0.0
    values[-1] = params.r1**d
    return Profile(ProfileKind.RADIAL_NORMALIZED, grid, values, params)


def density_from_profile(
    profile: Profile,
    slope_threshold: float = CONDENSATE_SLOPE_THRESHOLD,
) -> DensitySamples:
    """Reconstruct density samples from a profile, cell by cell.

    Each interior cell with forward difference ``delta`` contributes one
    sample at the cell midpoint: ``f = h/delta`` in 1D and ``g = d*h/delta``
    at radius ``mid**(1/d)`` radially.  Cells with ``delta/h`` below
    ``slope_threshold`` represent the point mass and are omitted.
    """
    u = profile.values
    h = profile.grid.spacing
    delta = np.diff(u)
    keep = delta / h >= slope_threshold
    if profile.kind is ProfileKind.INVERSE_CDF_1D:
        positions = 0.5 * (u[:-1] + u[1:])[keep]
        values = h / delta[keep]
    else:
        d = profile.params.dim
        mid = 0.5 * (u[:-1] + u[1:])[keep]
        positions = mid ** (1.0 / d)
        values = d * h / delta[keep]
    return DensitySamples(positions, values)


# --- minimizer profiles ----------------------------------------------------


def _steady_mass_table(
    theta: float, params: ModelParams, n_aux: int = 40001
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Partial-mass table r -> int_0^r f r^(d-1) for one steady state.

    Returns ``(r, mass, inner_mass, inner_exponent)`` where the table starts
    at ``r0 = 1e-3 r1`` with offset ``inner_mass`` when ``theta == 0`` (the
    singular head is integrated analytically; the mesh is log-spaced to track
    the steep profile).  For ``theta > 0`` the integrand is smooth and a
    uniform mesh from 0 is used.
    """
    gamma, dim, r1 = params.gamma, params.dim, params.r1
    if theta > 0.0:
        r = np.linspace(0.0, r1, n_aux)
        f = np.empty_like(r)
        f[0] = steady_state_density(theta, gamma, 0.0)
        f[1:] = steady_state_density(theta, gamma, r[1:])
        integrand = f * r ** (dim - 1)
        mass = np.concatenate(
            ([0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(r)))
        )
        return r, mass, 0.0, dim  # exponent unused when theta>0
    r0 = 1e-3 * r1
    c = blowup_prefactor(gamma)
    p = dim - 2.0 / gamma
    inner = c * (r0**p / p - r0 ** (p + 2.0) / (4.0 * (p + 2.0)))
    r = np.geomspace(r0, r1, n_aux)
    integrand = steady_state_density(0.0, gamma, r) * r ** (dim - 1)
    mass = inner + np.concatenate(
        ([0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(r)))
    )
    return r, mass, inner, p


def _invert_steady_mass(
    targets: np.ndarray,
    table: tuple[np.ndarray, np.ndarray, float, float],
    theta: float,
    params: ModelParams,
) -> np.ndarray:
    """Radii at which the steady partial mass reaches ``targets``."""
    r, mass, inner, p = table
    out = np.interp(targets, mass, r)
    if theta == 0.0:
        # Below the tabulated head, invert the leading power law.
        c = blowup_prefactor(params.gamma)
        head = targets < mass[0]
        if np.any(head):
            out[head] = (np.maximum(targets[head], 0.0) * p / c) ** (1.0 / p)
    return out


def minimizer_profile(spec: MinimizerSpec, grid: Grid) -> Profile:
    """Discretized pseudo-inverse profile of an entropy minimizer.

    With a point mass present the profile is exactly zero on the mass nodes
    covered by ``dirac_mass`` (centred interval in 1D, leading interval
    radially) and follows the limiting profile elsewhere; otherwise it is the
    inverse CDF of the smooth steady state.
    """
    params = spec.params
    if not np.isclose(spec.total_mass, grid.mass_total, rtol=1e-12):
        raise ValueError(
            f"minimizer mass {spec.total_mass} does not match grid mass "
            f"{grid.mass_total}"
        )
    table = _steady_mass_table(spec.theta, params)
    r_tab, mass_tab = table[0], table[1]
    nodes = grid.nodes()
    if params.dim == 1:
        # Smooth symmetric part carries (m - dirac)/2 on each side of the
        # drift's attractor at the origin.
        half = 0.5 * (spec.total_mass - spec.dirac_mass)
        mass_scaled = mass_tab * (half / mass_tab[-1])
        table = (r_tab, mass_scaled) + table[2:]
        left = spec.total_mass / 2.0 - spec.dirac_mass / 2.0
        right = spec.total_mass / 2.0 + spec.dirac_mass / 2.0
        values = np.zeros_like(nodes)
        lo = nodes < left
        hi = nodes > right
        values[lo] = -_invert_steady_mass(left - nodes[lo], table, spec.theta, params)
        values[hi] = _invert_steady_mass(nodes[hi] - right, table, spec.theta, params)
        values[0] = -params.r1
        values[-1] = params.r1
        kind = ProfileKind.INVERSE_CDF_1D
    else:
        smooth = spec.total_mass - spec.dirac_mass
        mass_scaled = mass_tab * (smooth / mass_tab[-1])
        table = (r_tab, mass_scaled) + table[2:]
        values = np.zeros_like(nodes)
        live = nodes > spec.dirac_mass
        radii = _invert_steady_mass(
            nodes[live] - spec.dirac_mass, table, spec.theta, params
        )
        values[live] = radii**params.dim
        values[0] = 0.0
        values[-1] = params.r1**params.dim
        kind = ProfileKind.RADIAL_NORMALIZED
    profile = Profile(kind, grid, values, params)
    profile.validate()
    return profile
