"""Fully discrete implicit solver for the 1D transformed equation (gamma > 2).

With ``n`` nodes ``u_0..u_{n-1}`` on the mass grid (``u_0 = -r1`` and
``u_{n-1} = r1`` pinned), the backward-Euler residual at interior node ``i``
is the symmetric finite-difference system

    F_i = h^g * [ ((u_{i+1}-u_{i-1})/(2h))^g (u_i - p_i)/tau
                  - ((u_{i+1}-u_i)^{g-1} - (u_i-u_{i-1})^{g-1}) h^{-g}/(g-1)
                  + u_i (((u_{i+1}-u_{i-1})/(2h))^g + 1) ]

with ``p`` the previous step and ``g = gamma``; the ``h^g`` factor matches
the residual entering the stopping test.  First differences are clamped at
zero before powers are taken (a no-op on monotone iterates), or replaced by
absolute values when ``slope_mode="abs"`` is selected for cross-checks.  The
all-zero stencil is an exact root, which is what lets the scheme carry a
condensate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np

from . import diagnostics
from .model import ModelParams
from .newton import NonConvergenceError, StepReport, newton_monotone_solve
from .transform import Grid, Profile

__all__ = [
    "Integrator",
    "SolverConfig",
    "StepReport",
    "NonConvergenceError",
    "residual_1d",
    "jacobian_1d",
    "solve_step_1d",
    "step_cn_1d",
    "evolve_1d",
]


class Integrator(Enum):
    BACKWARD_EULER = "backward_euler"
    CRANK_NICOLSON = "crank_nicolson"


@dataclass(frozen=True)
class SolverConfig:
    """Full parameterization of one evolution run."""

    params: ModelParams
    grid: Grid
    tau: float
    t_final: float
    integrator: Integrator = Integrator.BACKWARD_EULER
    newton_tol: float = 1e-8
    newton_max_iter: int = 50
    rearrange: bool = True
    slope_mode: str = "clamp"  # "clamp" or "abs"
    eps_reg: float = 0.0  # radial only
    delta_reg: float = 0.0  # radial only
    condensate_threshold: float | None = None  # None -> 1e-6 (1D) / 1e-10 (radial)
    tau_halving_retries: int = 0  # opt-in retry depth on Newton failure

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if self.slope_mode not in ("clamp", "abs"):
            raise ValueError(f"unknown slope_mode {self.slope_mode!r}")
        if self.eps_reg < 0 or self.delta_reg < 0:
            raise ValueError("regularization parameters must be nonnegative")

    @property
    def resolved_condensate_threshold(self) -> float:
        if self.condensate_threshold is not None:
            return self.condensate_threshold
        return 1e-6 if self.params.dim == 1 else 1e-10

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_final / self.tau + 1e-9))

    def replace(self, **kwargs) -> "SolverConfig":
        return replace(self, **kwargs)


def _differences(u: np.ndarray, mode: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward (a), backward (b) and central (c) differences at interior nodes."""
    fwd = u[1:] - u[:-1]
    cen = u[2:] - u[:-2]
    if mode == "abs":
        fwd = np.abs(fwd)
        cen = np.abs(cen)
    else:
        fwd = np.maximum(fwd, 0.0)
        cen = np.maximum(cen, 0.0)
    return fwd[1:], fwd[:-1], cen


def _spatial_terms(u: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """h^g-scaled diffusion + drift part of the residual (no time term)."""
    g = cfg.params.gamma
    h = cfg.grid.spacing
    a, b, c = _differences(u, cfg.slope_mode)
    diffusion = (a ** (g - 1.0) - b ** (g - 1.0)) / (g - 1.0)
    drift = u[1:-1] * ((0.5 * c) ** g + h**g)
    return -diffusion + drift


def residual_1d(u: np.ndarray, u_prev: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Backward-Euler residual at the interior nodes, h^gamma-scaled."""
    g = cfg.params.gamma
    _, _, c = _differences(u, cfg.slope_mode)
    time_term = (0.5 * c) ** g * (u[1:-1] - u_prev[1:-1]) / cfg.tau
    return time_term + _spatial_terms(u, cfg)


def _bands_common(u, u_prev, cfg, cn: bool) -> np.ndarray:
    """Tridiagonal Jacobian in solve_banded layout for BE or CN residuals."""
    g = cfg.params.gamma
    h = cfg.grid.spacing
    tau = cfg.tau
    ui = u[1:-1]
    fwd_raw = u[1:] - u[:-1]
    cen_raw = u[2:] - u[:-2]
    if cfg.slope_mode == "abs":
        a = np.abs(fwd_raw[1:])
        b = np.abs(fwd_raw[:-1])
        c = np.abs(cen_raw)
        sign_a = np.sign(fwd_raw[1:])
        sign_b = np.sign(fwd_raw[:-1])
        sign_c = np.sign(cen_raw)
    else:
        a = np.maximum(fwd_raw[1:], 0.0)
        b = np.maximum(fwd_raw[:-1], 0.0)
        c = np.maximum(cen_raw, 0.0)
        sign_a = (fwd_raw[1:] > 0).astype(float)
        sign_b = (fwd_raw[:-1] > 0).astype(float)
        sign_c = (cen_raw > 0).astype(float)

    cg = (0.5 * c) ** g  # (c/2)^g, the h^g-scaled slope power
    dcg = 0.5 * g * (0.5 * c) ** (g - 1.0) * sign_c  # d(cg)/d(u_{i+1}) = -d/d(u_{i-1})
    # 0^(g-2) is 0 for g > 2 and 1 at g == 2; keep it finite below g = 2 too
    at_zero = 0.0 if g != 2.0 else 1.0
    with np.errstate(divide="ignore"):
        ag = np.where(a > 0, a ** (g - 2.0), at_zero) * sign_a
        bg = np.where(b > 0, b ** (g - 2.0), at_zero) * sign_b
    dt = ui - u_prev[1:-1]

    if cn:
        cen_prev = u_prev[2:] - u_prev[:-2]
        if cfg.slope_mode == "abs":
            c_prev = np.abs(cen_prev)
        else:
            c_prev = np.maximum(cen_prev, 0.0)
        time_coeff = 0.5 * (cg + (0.5 * c_prev) ** g)
        dcg_time = 0.5 * dcg  # prefactor averaged over both levels
        half = 0.5
    else:
        time_coeff = cg
        dcg_time = dcg
        half = 1.0
    sub = -dcg_time * dt / tau + half * (-bg - dcg * ui)
    diag = time_coeff / tau + half * (ag + bg + cg + h**g)
    sup = dcg_time * dt / tau + half * (-ag + dcg * ui)

    m = ui.size
    bands = np.zeros((3, m))
    bands[0, 1:] = sup[:-1]
    bands[1, :] = diag
    bands[2, :-1] = sub[1:]
    return bands


def jacobian_1d(u: np.ndarray, u_prev: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Analytic Jacobian of :func:`residual_1d` (solve_banded layout)."""
    return _bands_common(u, u_prev, cfg, cn=False)


def residual_cn_1d(u: np.ndarray, u_prev: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Crank-Nicolson residual: spatial terms averaged over both time levels.

    The nonlinear prefactor of the time difference is averaged as well;
    freezing it at either level costs a first-order-in-tau component that
    caps the observable order well below 2.  The all-zero stencil stays an
    exact root (both prefactors vanish on it).
    """
    g = cfg.params.gamma
    _, _, c = _differences(u, cfg.slope_mode)
    _, _, c_prev = _differences(u_prev, cfg.slope_mode)
    prefactor = 0.5 * ((0.5 * c) ** g + (0.5 * c_prev) ** g)
    time_term = prefactor * (u[1:-1] - u_prev[1:-1]) / cfg.tau
    return time_term + 0.5 * (
        _spatial_terms(u, cfg) + _spatial_terms(u_prev, cfg)
    )


def jacobian_cn_1d(u: np.ndarray, u_prev: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    return _bands_common(u, u_prev, cfg, cn=True)


def _advance(
    profile: Profile,
    cfg: SolverConfig,
    residual: Callable,
    jacobian: Callable,
) -> tuple[Profile, StepReport]:
    prev = profile.values
    new_values, report = newton_monotone_solve(
        prev,
        lambda u: residual(u, prev, cfg),
        lambda u: jacobian(u, prev, cfg),
        tol=cfg.newton_tol,
        max_iter=cfg.newton_max_iter,
        rearrange=cfg.rearrange,
        bounds=(profile.lower_bound, profile.upper_bound),
    )
    out = profile.with_values(new_values)
    out.validate()
    return out, report


def solve_step_1d(u_prev: Profile, cfg: SolverConfig) -> tuple[Profile, StepReport]:
    """One backward Euler step by Newton iteration from ``u_prev``."""
    return _advance(u_prev, cfg, residual_1d, jacobian_1d)


def step_cn_1d(u_prev: Profile, cfg: SolverConfig) -> tuple[Profile, StepReport]:
    """One Crank-Nicolson-type step (second order for smooth solutions)."""
    return _advance(u_prev, cfg, residual_cn_1d, jacobian_cn_1d)


def _step_with_retry(
    profile: Profile,
    cfg: SolverConfig,
    stepper: Callable[[Profile, SolverConfig], tuple[Profile, StepReport]],
    retries: int,
) -> tuple[Profile, StepReport]:
    """Take one tau-step, optionally retrying as two tau/2 sub-steps."""
    try:
        return stepper(profile, cfg)
    except NonConvergenceError:
        if retries <= 0:
            raise
    half = cfg.replace(tau=cfg.tau / 2.0)
    mid, r1 = _step_with_retry(profile, half, stepper, retries - 1)
    end, r2 = _step_with_retry(mid, half, stepper, retries - 1)
    return end, StepReport(
        r1.newton_iterations + r2.newton_iterations,
        max(r1.final_residual_norm, r2.final_residual_norm),
        r1.rearrangements_applied + r2.rearrangements_applied,
    )


def evolve_1d(
    u0: Profile,
    cfg: SolverConfig,
    observers: "diagnostics.ObserverConfig | None" = None,
) -> tuple["diagnostics.TraceSet", Profile]:
    """Run the implicit scheme to ``t_final``; deterministic for fixed config.

    ``observers`` controls trace sampling (entropy, condensate size,
    snapshots); with ``None`` no traces are collected.  Nonconvergence is
    re-raised with the failing step index attached.
    """
    stepper = (
        step_cn_1d if cfg.integrator is Integrator.CRANK_NICOLSON else solve_step_1d
    )
    recorder = diagnostics.TraceRecorder(u0, cfg, observers)
    profile = u0
    for step in range(1, cfg.n_steps + 1):
        try:
            profile, report = _step_with_retry(
                profile, cfg, stepper, cfg.tau_halving_retries
            )
        except NonConvergenceError as exc:
            exc.step_index = step
            raise
        recorder.record(step, profile)
    return recorder.finish(), profile
