"""Tests for the radial implicit solver (d = 2, 3)."""
import numpy as np
import pytest

from condensate_lab.diagnostics import ObserverConfig
from condensate_lab.model import ModelParams, entropy_minimizer
from condensate_lab.solver1d import SolverConfig
from condensate_lab.solver_radial import (
    LogSingularityError,
    RadialState,
    evolve_radial,
    jacobian_radial,
    residual_radial,
    solve_step_radial,
)
from condensate_lab.transform import (
    Grid,
    Profile,
    ProfileKind,
    density_mass,
    inverse_cdf_from_density,
    minimizer_profile,
)

P2D = ModelParams(gamma=1.0, dim=2, r1=1.0)
P3D = ModelParams(gamma=1.0, dim=3, r1=1.0)


def make_cfg(params, n, mass, tau=0.01, **kw):
    return SolverConfig(
        params=params, grid=Grid(n, mass), tau=tau, t_final=1.0, **kw
    )


def random_monotone_radial(rng, n, top=1.0, min_gap=0.2):
    gaps = rng.uniform(min_gap, 1.0, n - 1)
    values = np.concatenate([[0.0], np.cumsum(gaps)])
    values *= top / values[-1]
    values[0], values[-1] = 0.0, top
    return values


def bands_to_dense(bands):
    m = bands.shape[1]
    dense = np.zeros((m, m))
    for i in range(m):
        dense[i, i] = bands[1, i]
        if i + 1 < m:
            dense[i, i + 1] = bands[0, i + 1]
        if i - 1 >= 0:
            dense[i, i - 1] = bands[2, i - 1]
    return dense


def fd_jacobian(u, u_prev, cfg, step=1e-6):
    m = u.size - 2
    out = np.zeros((m, m))
    for j in range(1, u.size - 1):
        hi, lo = u.copy(), u.copy()
        hi[j] += step
        lo[j] -= step
        out[:, j - 1] = (
            residual_radial(hi, u_prev, cfg) - residual_radial(lo, u_prev, cfg)
        ) / (2 * step)
    return out


class TestResidual:
    def test_flat_zero_stencil_is_root(self):
        cfg = make_cfg(P3D, 7, 0.4, eps_reg=1e-8, delta_reg=1e-9)
        s = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 1.0])
        res = residual_radial(s, s.copy(), cfg)
        assert res[0] == 0.0
        assert res[1] == 0.0
        assert res[2] == 0.0

    def test_linear_profile_hand_value_2d(self):
        # d=2, eps=delta=0, S linear with slope p, steady in time: the log
        # jump vanishes and the residual reduces to S_i (p + 2)
        n = 11
        mass = 1.0
        grid = Grid(n, mass)
        p_slope = 1.0 / grid.spacing * 0.1  # S goes from 0 to 1
        s = np.linspace(0.0, 1.0, n)
        cfg = SolverConfig(params=P2D, grid=grid, tau=0.5, t_final=1.0)
        res = residual_radial(s, s.copy(), cfg)
        slope = 1.0 / mass  # dS/dz with S spanning [0, 1] over [0, mass]
        expected = s[1:-1] * (slope + 2.0)
        assert np.allclose(res, expected, rtol=1e-12)

    def test_steady_state_truncation_second_order_2d(self):
        # node values from per-node quadrature inversion, so the measured
        # residual is pure truncation error, not table interpolation noise
        from scipy.integrate import quad
        from scipy.optimize import brentq

        from condensate_lab.model import steady_state_density, theta_for_mass

        mass = 1.2
        theta = theta_for_mass(mass, P2D)

        def partial_mass(r):
            return quad(
                lambda x: steady_state_density(theta, 1.0, x) * x,
                0.0,
                r,
                epsabs=1e-13,
                epsrel=1e-13,
            )[0]

        total = partial_mass(1.0)

        def exact_values(cells):
            nodes = np.linspace(0.0, mass, cells + 1)
            targets = nodes * (total / mass)
            radii = [0.0]
            for z in targets[1:-1]:
                radii.append(brentq(lambda r: partial_mass(r) - z, 1e-12, 1.0))
            radii.append(1.0)
            return np.asarray(radii) ** 2

        def max_residual(cells):
            grid = Grid(cells + 1, mass)
            s = exact_values(cells)
            cfg = SolverConfig(params=P2D, grid=grid, tau=1.0, t_final=1.0)
            return np.max(np.abs(residual_radial(s, s.copy(), cfg)))

        ratio = max_residual(100) / max_residual(200)
        assert 3.2 <= ratio <= 4.8

    def test_log_singularity_requires_eps(self):
        cfg = make_cfg(P3D, 7, 0.4, eps_reg=0.0)
        s = np.array([0.0, 0.0, 0.1, 0.3, 0.5, 0.8, 1.0])
        with pytest.raises(LogSingularityError):
            residual_radial(s, s.copy(), cfg)


class TestJacobian:
    def test_matches_finite_differences_gamma1(self):
        # moderate mesh and mass keep the 1/h^2 amplification of the log
        # diffusion small enough for trustworthy central differences
        rng = np.random.default_rng(3)
        s = random_monotone_radial(rng, 30)
        s_prev = random_monotone_radial(rng, 30)
        cfg = make_cfg(P3D, 30, 4.0, tau=0.1, eps_reg=1e-10, delta_reg=1e-10)
        dev = np.abs(
            fd_jacobian(s, s_prev, cfg) - bands_to_dense(jacobian_radial(s, s_prev, cfg))
        ).max()
        assert dev < 1e-5

    def test_matches_finite_differences_power_variant(self):
        rng = np.random.default_rng(5)
        s = random_monotone_radial(rng, 30)
        s_prev = random_monotone_radial(rng, 30)
        params = ModelParams(gamma=1.5, dim=3, r1=1.0)
        cfg = make_cfg(params, 30, 0.4, eps_reg=1e-6, delta_reg=1e-6)
        dev = np.abs(
            fd_jacobian(s, s_prev, cfg) - bands_to_dense(jacobian_radial(s, s_prev, cfg))
        ).max()
        assert dev < 1e-5

    def test_tridiagonal_sparsity(self):
        rng = np.random.default_rng(7)
        s = random_monotone_radial(rng, 10)
        cfg = make_cfg(P2D, 10, 1.0)
        fd = fd_jacobian(s, s.copy(), cfg)
        off = fd.copy()
        for k in (-1, 0, 1):
            off -= np.diag(np.diag(fd, k), k)
        assert np.abs(off).max() < 1e-6

    def test_delta_scaling_at_degenerate_node(self):
        # S_{i-1} = S_i = 0 with a live forward difference: the superdiagonal
        # diffusion entry carries the prefactor d (S_i + delta)^(2-2/d)
        def sup_entry(delta):
            cfg = make_cfg(P3D, 5, 0.2, eps_reg=1e-10, delta_reg=delta)
            s = np.array([0.0, 0.0, 0.0, 0.5, 1.0])
            bands = jacobian_radial(s, s.copy(), cfg)
            # row of interior node 2 (zero value, positive forward slope):
            # remove the slope-independent drift part by differencing deltas
            return bands[0, 2]

        base = sup_entry(1e-9) - sup_entry(0.0)
        double = sup_entry(2e-9) - sup_entry(0.0)
        assert double / base == pytest.approx(2.0 ** (4.0 / 3.0), rel=1e-6)


def radial_setup(A=3.0, sigma_sq=0.09, n=401, tau=1e-3, t_final=0.05, **kw):
    dens = lambda r: A * np.exp(-(r**2) / (2 * sigma_sq))
    mass = density_mass(dens, P3D)
    grid = Grid(n, mass)
    profile = inverse_cdf_from_density(dens, P3D, grid)
    cfg = SolverConfig(params=P3D, grid=grid, tau=tau, t_final=t_final, **kw)
    return profile, cfg


class TestSteppers:
    def test_first_step_invariants(self):
        profile, cfg = radial_setup()
        state, report = solve_step_radial(RadialState(profile), cfg)
        state.profile.validate()
        assert state.profile.values[-1] == profile.values[-1]
        assert report.final_residual_norm < cfg.newton_tol

    def test_fixed_point(self):
        from condensate_lab.solver_radial import evolve_radial

        profile, cfg = radial_setup(n=101, eps_reg=1e-12)
        relax = cfg.replace(tau=0.05, t_final=5.0, tau_halving_retries=6)
        _, state = evolve_radial(profile, relax, None)
        again, report = solve_step_radial(state, relax.replace(tau_halving_retries=0))
        assert report.newton_iterations <= 1
        assert np.allclose(again.profile.values, state.profile.values, atol=1e-7)

    def test_rearrangement_off_matches_on_when_nondegenerate(self):
        profile, cfg = radial_setup(n=201, tau=1e-3, t_final=0.02)
        on = RadialState(profile)
        off = RadialState(profile)
        cfg_off = cfg.replace(rearrange=False)
        for _ in range(20):
            on, _ = solve_step_radial(on, cfg)
            off, _ = solve_step_radial(off, cfg_off)
        assert np.max(np.abs(on.profile.values - off.profile.values)) < 1e-10


class TestEvolve:
    def test_subcritical_run_monotone_entropy_and_no_condensate(self):
        profile, cfg = radial_setup(n=401, tau=1e-3, t_final=0.05)
        trace, final = evolve_radial(profile, cfg, ObserverConfig(cadence=1))
        h = np.array([x for _, x in trace.entropy])
        assert np.all(np.diff(h) <= 1e-10)
        xs = np.array([x for _, x in trace.condensate])
        assert np.all(xs == 0.0)
        final.profile.validate()

    def test_entropy_monotone_d2(self):
        # the convexity argument holds for d = 2, so the check is strict
        dens = lambda r: 4.0 * np.exp(-(r**2) / (2 * 0.81))
        mass = density_mass(dens, P2D)
        grid = Grid(201, mass)
        profile = inverse_cdf_from_density(dens, P2D, grid)
        cfg = SolverConfig(params=P2D, grid=grid, tau=1e-3, t_final=0.04)
        trace, _ = evolve_radial(profile, cfg, ObserverConfig(cadence=1))
        h = np.array([x for _, x in trace.entropy])
        assert np.all(np.diff(h) <= 1e-10)

    def test_supercritical_run_condenses(self):
        # scaled-down version of the supercritical radial preset
        dens = lambda r: 10.0 * np.exp(-(r**2) / (2 * 0.9))
        mass = density_mass(dens, P3D)
        grid = Grid(1001, mass)
        profile = inverse_cdf_from_density(dens, P3D, grid)
        cfg = SolverConfig(
            params=P3D,
            grid=grid,
            tau=2e-4,
            t_final=0.15,
            eps_reg=1e-12,
            tau_halving_retries=3,  # coarse condensate fronts make plain
            # Newton cycle; the halved sub-steps restore convergence
        )
        trace, final = evolve_radial(profile, cfg, ObserverConfig(cadence=5))
        xs = np.array([x for _, x in trace.condensate])
        assert xs.max() > 0.0
        final.profile.validate()

    def test_zero_step_edge(self):
        profile, cfg = radial_setup()
        short = cfg.replace(t_final=cfg.tau / 2.0)
        trace, final = evolve_radial(profile, short, None)
        assert np.array_equal(final.profile.values, profile.values)
        assert trace.entropy == []
