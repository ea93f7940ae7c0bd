"""Entropy evaluation, condensate measurement and profile diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model, transform
from .transform import Profile, ProfileKind

__all__ = [
    "TraceSet",
    "ObserverConfig",
    "TraceRecorder",
    "WindowError",
    "InsufficientSamplesError",
    "entropy_1d",
    "entropy_radial",
    "entropy_of_profile",
    "condensate_size",
    "decay_rate",
    "blowup_profile_fit",
    "blowup_profile_samples",
    "minimizer_entropy",
]


class WindowError(ValueError):
    """The requested fit window contains unusable samples."""


class InsufficientSamplesError(ValueError):
    """Too few density samples inside the fit window."""


@dataclass
class TraceSet:
    """Time series collected along one evolution."""

    entropy: list[tuple[float, float]] = field(default_factory=list)
    condensate: list[tuple[float, float]] = field(default_factory=list)
    snapshots: list[tuple[float, Profile]] = field(default_factory=list)
    h_infinity: float = float("nan")

    def entropy_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.entropy:
            return np.empty(0), np.empty(0)
        t, h = zip(*self.entropy)
        return np.asarray(t), np.asarray(h)

    def condensate_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.condensate:
            return np.empty(0), np.empty(0)
        t, x = zip(*self.condensate)
        return np.asarray(t), np.asarray(x)


def entropy_1d(u: Profile, psi_eval=None) -> float:
    """Composite-rule entropy of a 1D profile.

    Cell rule: ``h * [(u_i^2 + u_{i+1}^2)/4 + psi((u_{i+1}-u_i)/h)]`` with
    ``psi(0) = 0`` on condensate cells.
    """
    if psi_eval is None:
        psi_eval = model.psi_fast(u.params.gamma, 1)
    v = u.values
    h = u.grid.spacing
    kinetic = float(np.sum(0.25 * (v[:-1] ** 2 + v[1:] ** 2)))
    slopes = np.diff(v) / h
    potential = float(np.sum(psi_eval(slopes)))
    return h * (kinetic + potential)


def entropy_radial(s: Profile, psi_eval=None) -> float:
    """Composite-rule entropy of a radial profile.

    Cell rule: ``h * [(S_i^(2/d) + S_{i+1}^(2/d))/4 + psi_d((S_{i+1}-S_i)/h)]``.
    """
    d = s.params.dim
    if psi_eval is None:
        psi_eval = model.psi_fast(s.params.gamma, d)
    v = s.values
    h = s.grid.spacing
    power = v ** (2.0 / d)
    kinetic = float(np.sum(0.25 * (power[:-1] + power[1:])))
    slopes = np.diff(v) / h
    potential = float(np.sum(psi_eval(slopes)))
    return h * (kinetic + potential)


def entropy_of_profile(profile: Profile, psi_eval=None) -> float:
    if profile.kind is ProfileKind.INVERSE_CDF_1D:
        return entropy_1d(profile, psi_eval)
    return entropy_radial(profile, psi_eval)


def minimizer_entropy(profile: Profile) -> float:
    """Entropy of the discretized minimizer on the profile's own grid.

    Using the same grid and quadrature as the trace entropies makes the
    discretization errors cancel in the relative entropy.
    """
    spec = model.entropy_minimizer(profile.grid.mass_total, profile.params)
    floor = transform.minimizer_profile(spec, profile.grid)
    return entropy_of_profile(floor)


def condensate_size(profile: Profile, threshold: float) -> float:
    """Mass of the flat zero set: grid spacing times the interior node count
    below threshold (|u| in 1D, S radially)."""
    v = profile.values[1:-1]
    if profile.kind is ProfileKind.INVERSE_CDF_1D:
        count = int(np.count_nonzero(np.abs(v) < threshold))
    else:
        count = int(np.count_nonzero(v < threshold))
    return profile.grid.spacing * count


def decay_rate(trace: TraceSet, window: tuple[float, float]) -> float:
    """Exponential decay rate of the relative entropy over a time window.

    Fits ``log(H(t) - H_inf)`` by least squares on the trace samples with
    ``window[0] <= t <= window[1]`` and returns the negated slope.
    """
    t, h = trace.entropy_arrays()
    if t.size == 0:
        raise WindowError("trace has no entropy samples")
    mask = (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(mask) < 2:
        raise WindowError("window invalid: fewer than two samples")
    rel = h[mask] - trace.h_infinity
    if np.any(rel <= 0):
        raise WindowError(
            "window invalid: relative entropy is not positive everywhere"
        )
    slope, _ = np.polyfit(t[mask], np.log(rel), 1)
    return -float(slope)


def blowup_profile_samples(
    profile: Profile,
    window: tuple[float, float],
    threshold: float | None = None,
    skip_cells: int = 3,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Density samples near the condensate: (|v|, f, limiting profile f_c).

    Densities come from centred differences of the profile, skipping
    ``skip_cells`` nodes on each side of the flat (condensate) set, whose
    one-sided degeneracy would pollute the values.
    """
    if threshold is None:
        threshold = 1e-6 if profile.kind is ProfileKind.INVERSE_CDF_1D else 1e-10
    v = profile.values
    h = profile.grid.spacing
    if profile.kind is ProfileKind.INVERSE_CDF_1D:
        flat = np.abs(v) < threshold
    else:
        flat = v < threshold
    if not np.any(flat[1:-1]):
        raise ValueError("profile has no condensate set; fit is not meaningful")

    # exclude nodes within skip_cells of the flat set
    excluded = flat.copy()
    for _ in range(skip_cells):
        excluded[1:] |= excluded[:-1].copy()
        excluded[:-1] |= excluded[1:].copy()

    idx = np.arange(1, v.size - 1)
    central = v[2:] - v[:-2]
    usable = (~excluded[1:-1]) & (central > 0)
    idx = idx[usable]
    central = central[usable]
    if profile.kind is ProfileKind.INVERSE_CDF_1D:
        position = np.abs(v[idx])
        density = 2.0 * h / central
    else:
        d = profile.params.dim
        position = v[idx] ** (1.0 / d)
        density = d * 2.0 * h / central

    in_window = (position > window[0]) & (position < window[1])
    if np.count_nonzero(in_window) < 5:
        raise InsufficientSamplesError(
            f"only {np.count_nonzero(in_window)} samples in window {window}"
        )
    position = position[in_window]
    density = density[in_window]
    reference = model.steady_state_density(0.0, profile.params.gamma, position)
    order = np.argsort(position)
    return position[order], density[order], reference[order]


def blowup_profile_fit(
    profile: Profile,
    window: tuple[float, float],
    threshold: float | None = None,
    skip_cells: int = 3,
    law: str = "ratio",
) -> tuple[float, float]:
    """Fit the leading blow-up correction near the condensate.

    ``law="ratio"`` fits ``f/f_c ~ 1 + c |v|`` (the radial first-order law,
    where the deviation from the limiting profile scales like ``|v|^-1``).
    ``law="difference"`` fits ``f - f_c ~ c |v|`` directly, which is the
    first-order law of the 1D equation; its ratio form flattens like
    ``|v|^(1 + 2/gamma)`` near the origin and is not linear.  Returns the
    fitted coefficient and the coefficient of determination of the
    one-parameter model.
    """
    position, density, reference = blowup_profile_samples(
        profile, window, threshold, skip_cells
    )
    if law == "ratio":
        target = density / reference - 1.0
    elif law == "difference":
        target = density - reference
    else:
        raise ValueError(f"unknown law {law!r}")
    # one-parameter least squares through the origin
    c_tilde = float(np.dot(target, position) / np.dot(position, position))
    residual = target - c_tilde * position
    ss_res = float(np.dot(residual, residual))
    ss_tot = float(np.sum((target - target.mean()) ** 2))
    r_squared = 1.0 if ss_tot < 1e-30 else 1.0 - ss_res / ss_tot
    return c_tilde, r_squared


@dataclass(frozen=True)
class ObserverConfig:
    """What to sample along an evolution and how often."""

    cadence: int = 10
    entropy: bool = True
    condensate: bool = True
    snapshot_times: tuple[float, ...] = ()
    auto_condensate_snapshots: bool = False
    compute_h_infinity: bool = True

    def __post_init__(self) -> None:
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")


class TraceRecorder:
    """Accumulates a :class:`TraceSet` during an evolution loop."""

    def __init__(self, u0: Profile, cfg, observers: ObserverConfig | None):
        self.cfg = cfg
        self.observers = observers
        self.trace = TraceSet()
        self.n_steps = cfg.n_steps
        if observers is None:
            return
        self._psi = model.psi_fast(u0.params.gamma, u0.params.dim)
        if observers.compute_h_infinity:
            self.trace.h_infinity = minimizer_entropy(u0)
        self._pending_snapshots = sorted(observers.snapshot_times)
        # a symmetric datum puts one node at exactly zero; transitions are
        # detected relative to that baseline, not to zero
        self._baseline = condensate_size(u0, cfg.resolved_condensate_threshold)
        self._last_condensate = self._baseline
        self._sample(0.0, u0)

    def _sample(self, t: float, profile: Profile) -> None:
        obs = self.observers
        if obs.entropy:
            self.trace.entropy.append((t, entropy_of_profile(profile, self._psi)))
        size = None
        if obs.condensate:
            size = condensate_size(profile, self.cfg.resolved_condensate_threshold)
            self.trace.condensate.append((t, size))
        while self._pending_snapshots and t >= self._pending_snapshots[0] - 1e-12:
            self._pending_snapshots.pop(0)
            self.trace.snapshots.append((t, profile.with_values(profile.values.copy())))
        if (
            obs.auto_condensate_snapshots
            and size is not None
            and (size > self._baseline) != (self._last_condensate > self._baseline)
        ):
            self.trace.snapshots.append((t, profile.with_values(profile.values.copy())))
        if size is not None:
            self._last_condensate = size

    def record(self, step: int, profile: Profile) -> None:
        if self.observers is None:
            return
        if step % self.observers.cadence == 0 or step == self.n_steps:
            self._sample(step * self.cfg.tau, profile)

    def finish(self) -> TraceSet:
        return self.trace
