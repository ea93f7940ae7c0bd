"""Tests for entropy evaluation, condensate measurement and profile fits."""
import math

import numpy as np
import pytest

from condensate_lab.diagnostics import (
    InsufficientSamplesError,
    TraceSet,
    WindowError,
    blowup_profile_fit,
    condensate_size,
    decay_rate,
    entropy_1d,
    entropy_radial,
)
from condensate_lab.model import (
    ModelParams,
    entropy_minimizer,
    phi,
    psi,
    steady_state_density,
)
from condensate_lab.transform import (
    Grid,
    Profile,
    ProfileKind,
    density_mass,
    inverse_cdf_from_density,
    minimizer_profile,
)

P1D = ModelParams(gamma=2.9, dim=1, r1=1.0)
P1D_G1 = None  # constructed below with warning suppressed
P3D = ModelParams(gamma=1.0, dim=3, r1=1.0)

import warnings

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    P1D_G1 = ModelParams(gamma=1.0, dim=1, r1=1.0)


class TestEntropy1D:
    def test_linear_profile_closed_form(self):
        # u linear from -1 to 1 over mass 2, gamma 1: kinetic 1/3 and
        # potential 2 psi(1) = -4 ln 2
        grid = Grid(2001, 2.0)
        profile = Profile(
            ProfileKind.INVERSE_CDF_1D, grid, np.linspace(-1, 1, 2001), P1D_G1
        )
        expected = 1.0 / 3.0 - 4.0 * math.log(2.0)
        assert entropy_1d(profile) == pytest.approx(expected, abs=1e-5)
        assert entropy_1d(profile) == pytest.approx(-2.43926, abs=1e-4)

    def test_flat_cells_contribute_nothing(self):
        grid = Grid(11, 2.0)
        values = np.zeros(11)
        values[0], values[-1] = -1.0, 1.0
        profile = Profile(ProfileKind.INVERSE_CDF_1D, grid, values, P1D_G1)
        # only the two boundary cells carry kinetic/potential weight
        h = grid.spacing
        slope = 1.0 / h
        expected = h * (2 * 0.25 + 2 * psi(slope, 1.0))
        assert entropy_1d(profile) == pytest.approx(expected, rel=1e-12)

    def test_minimizer_has_least_entropy(self):
        rng = np.random.default_rng(21)
        mass = 2.0
        grid = Grid(301, mass)
        spec = entropy_minimizer(mass, P1D)
        floor = entropy_1d(minimizer_profile(spec, grid))
        for _ in range(20):
            gaps = rng.uniform(0.05, 1.0, grid.n_points - 1)
            values = np.concatenate([[0.0], np.cumsum(gaps)])
            values = -1.0 + 2.0 * values / values[-1]
            values[0], values[-1] = -1.0, 1.0
            profile = Profile(ProfileKind.INVERSE_CDF_1D, grid, values, P1D)
            assert entropy_1d(profile) >= floor - 1e-12


class TestEntropyRadial:
    def test_linear_profile_closed_form(self):
        c = 2.5
        mass = c / 3.0
        grid = Grid(4001, mass)
        values = 3.0 * grid.nodes() / c
        values[-1] = 1.0
        profile = Profile(ProfileKind.RADIAL_NORMALIZED, grid, values, P3D)
        # kinetic: int_0^mass (3z/c)^(2/3)/2 dz = (3/c)^(2/3) mass^(5/3) * 3/10
        kinetic = (3.0 / c) ** (2.0 / 3.0) * mass ** (5.0 / 3.0) * 0.3
        potential = mass * psi(3.0 / c, 1.0, dim=3)
        assert entropy_radial(profile) == pytest.approx(
            kinetic + potential, abs=1e-6
        )

    def test_flat_block_contributes_nothing(self):
        grid = Grid(21, 1.0)
        values = np.concatenate([np.zeros(11), np.linspace(0.05, 1.0, 10)])
        profile = Profile(ProfileKind.RADIAL_NORMALIZED, grid, values, P3D)
        h = grid.spacing
        slopes = np.diff(values) / h
        expected = h * (
            np.sum(0.25 * (values[:-1] ** (2 / 3) + values[1:] ** (2 / 3)))
            + np.sum(psi(slopes[slopes > 0], 1.0, dim=3))
        )
        assert entropy_radial(profile) == pytest.approx(expected, rel=1e-12)

    def test_gaussian_above_minimizer(self):
        dens = lambda r: 3.0 * np.exp(-(r**2) / (2 * 0.09))
        mass = density_mass(dens, P3D)
        grid = Grid(501, mass)
        initial = inverse_cdf_from_density(dens, P3D, grid)
        floor = minimizer_profile(entropy_minimizer(mass, P3D), grid)
        assert entropy_radial(floor) < entropy_radial(initial)

    def test_refinement_consistency(self):
        # re-quadrature on nested refinements changes H at second order
        dens = lambda r: 3.0 * np.exp(-(r**2) / (2 * 0.09))
        mass = density_mass(dens, P3D)

        def h_of(n):
            grid = Grid(n, mass)
            return entropy_radial(inverse_cdf_from_density(dens, P3D, grid))

        d1 = abs(h_of(201) - h_of(801))
        d2 = abs(h_of(401) - h_of(1601))
        assert 2.5 <= d1 / d2 <= 6.0


class TestCondensateSize:
    def test_positive_slope_profile(self):
        grid = Grid(51, 1.0)
        values = np.linspace(0.0, 1.0, 51)
        profile = Profile(ProfileKind.RADIAL_NORMALIZED, grid, values, P3D)
        assert condensate_size(profile, 1e-10) == 0.0

    def test_counting_contract(self):
        grid = Grid(21, 1.0)
        k = 7
        values = np.concatenate([np.zeros(k + 1), np.linspace(0.1, 1.0, 13)])
        profile = Profile(ProfileKind.RADIAL_NORMALIZED, grid, values, P3D)
        assert condensate_size(profile, 1e-10) == pytest.approx(k * grid.spacing)

    def test_monotone_in_threshold(self):
        grid = Grid(21, 1.0)
        values = np.concatenate([np.zeros(6), np.geomspace(1e-9, 1.0, 15)])
        profile = Profile(ProfileKind.RADIAL_NORMALIZED, grid, values, P3D)
        sizes = [condensate_size(profile, thr) for thr in (1e-12, 1e-8, 1e-4)]
        assert sizes == sorted(sizes)


class TestDecayRate:
    def test_exact_exponential(self):
        t = np.linspace(0.0, 1.0, 200)
        trace = TraceSet(
            entropy=[(float(x), float(-1.0 + math.exp(-2.0 * x))) for x in t],
            h_infinity=-1.0,
        )
        assert decay_rate(trace, (0.1, 0.9)) == pytest.approx(2.0, abs=1e-10)

    def test_constant_trace(self):
        t = np.linspace(0.0, 1.0, 50)
        trace = TraceSet(entropy=[(float(x), 1.0) for x in t], h_infinity=0.0)
        assert decay_rate(trace, (0.0, 1.0)) == pytest.approx(0.0, abs=1e-12)

    def test_invalid_window(self):
        trace = TraceSet(entropy=[(0.0, 1.0), (1.0, -1.0)], h_infinity=0.0)
        with pytest.raises(WindowError):
            decay_rate(trace, (0.0, 1.0))


def manufactured_profile(c_tilde, n=2001, extent=0.18):
    """Profile of f = f_c (1 + c |v|) near the origin, frozen outside."""

    def density(v):
        r = np.abs(v)
        inner = np.minimum(r, extent)
        base = np.where(r > 0, steady_state_density(0.0, 2.9, np.maximum(r, 1e-300)), 0.0)
        edge = steady_state_density(0.0, 2.9, extent) * (1.0 + c_tilde * extent)
        return np.where(
            r <= extent, base * (1.0 + c_tilde * inner), edge * np.exp(extent - r)
        )

    # the singular density integrates slowly under trapezoid; use the same
    # auxiliary resolution for the mass so grid and CDF stay consistent
    mass = density_mass(density, P1D, n_aux=10 * (n - 1) + 1)
    grid = Grid(n, mass)
    return inverse_cdf_from_density(density, P1D, grid)


class TestBlowupFit:
    @pytest.mark.parametrize("c_tilde", [-5.0, 0.0, 3.0])
    def test_recovers_planted_ratio_coefficient(self, c_tilde):
        profile = manufactured_profile(c_tilde)
        got, r_squared = blowup_profile_fit(profile, (0.02, 0.15), law="ratio")
        if c_tilde == 0.0:
            assert abs(got) < 0.05
        else:
            assert got == pytest.approx(c_tilde, rel=0.02)
            assert r_squared > 0.999

    def test_difference_law_on_linear_error_data(self):
        # f = f_c + c |v| to first order: the difference fit sees c exactly
        c = 2.0

        def density(v):
            r = np.abs(v)
            base = np.where(
                r > 0, steady_state_density(0.0, 2.9, np.maximum(r, 1e-300)), 0.0
            )
            edge = steady_state_density(0.0, 2.9, 0.3) + c * 0.3
            return np.where(r <= 0.3, base + c * np.minimum(r, 0.3), edge * np.exp(0.3 - r))

        mass = density_mass(density, P1D, n_aux=20001)
        profile = inverse_cdf_from_density(density, P1D, Grid(2001, mass))
        got, r_squared = blowup_profile_fit(profile, (0.02, 0.2), law="difference")
        assert got == pytest.approx(c, rel=0.02)
        assert r_squared > 0.999

    def test_exact_critical_profile(self):
        profile = manufactured_profile(0.0)
        got, r_squared = blowup_profile_fit(profile, (0.02, 0.15))
        assert abs(got) < 0.05
        assert r_squared <= 1.0

    def test_no_condensate_rejected(self):
        # even node count: no node sits at exactly zero
        grid = Grid(100, 2.0)
        values = np.linspace(-1.0, 1.0, 100)
        profile = Profile(ProfileKind.INVERSE_CDF_1D, grid, values, P1D)
        with pytest.raises(ValueError):
            blowup_profile_fit(profile, (0.02, 0.2))

    def test_insufficient_samples(self):
        profile = manufactured_profile(0.0, n=51)
        with pytest.raises(InsufficientSamplesError):
            blowup_profile_fit(profile, (0.0299, 0.03))
