"""Damping-free Newton iteration for the implicit time steps.

Both solvers produce strictly tridiagonal Jacobians over the interior
unknowns (boundary nodes are pinned), solved directly with LAPACK's banded
routine.  Iterates are monotonically rearranged (interior sort) after every
update when requested; the stopping test is the plain l2 norm of the scaled
residual.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

__all__ = ["StepReport", "NonConvergenceError", "newton_monotone_solve"]

# A vanishing Jacobian diagonal means the iterate is genuinely degenerate;
# treated as nonconvergence rather than patched.
_DIAGONAL_FLOOR = 1e-14


@dataclass(frozen=True)
class StepReport:
    """Outcome of one implicit step."""

    newton_iterations: int
    final_residual_norm: float
    rearrangements_applied: int


class NonConvergenceError(RuntimeError):
    """Newton iteration failed to reach the residual tolerance."""

    def __init__(self, message: str, residual_norm: float, iterations: int):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.step_index: int | None = None  # filled in by the evolution loop


def newton_monotone_solve(
    start: np.ndarray,
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian_bands: Callable[[np.ndarray], np.ndarray],
    *,
    tol: float,
    max_iter: int,
    rearrange: bool = True,
    bounds: tuple[float, float] | None = None,
) -> tuple[np.ndarray, StepReport]:
    """Solve the interior system, keeping the boundary entries of ``start``.

    ``residual(u)`` returns the interior residual vector; ``jacobian_bands``
    its tridiagonal Jacobian in ``scipy.linalg.solve_banded`` layout
    (rows: super, diag, sub).

    At least one update is always applied (the tolerance is tested after the
    update, do-while style).  The scaled residual of a near-steady iterate
    can start below any fixed tolerance on fine meshes, and testing first
    would freeze the evolution there; an exact root still yields a zero
    update.

    The monotone rearrangement sorts the interior ascending and, when
    ``bounds`` are given, clips it into the pinned boundary range first
    (iterates escaping the range would break monotonicity across the fixed
    boundary nodes, and degenerate prefactors like S^(2-2/d) are undefined
    below it).
    """
    u = np.array(start, dtype=float)
    f = residual(u)
    norm = float(np.linalg.norm(f))
    iterations = 0
    rearrangements = 0
    while iterations == 0 or not norm < tol:
        if not np.isfinite(norm):
            raise NonConvergenceError(
                "residual is not finite", norm, iterations
            )
        if iterations >= max_iter:
            raise NonConvergenceError(
                f"no convergence in {max_iter} Newton iterations "
                f"(residual {norm:.3e}, tolerance {tol:.1e})",
                norm,
                iterations,
            )
        bands = jacobian_bands(u)
        if np.min(np.abs(bands[1])) < _DIAGONAL_FLOOR:
            raise NonConvergenceError(
                "degenerate Jacobian diagonal", norm, iterations
            )
        try:
            step = solve_banded((1, 1), bands, -f, check_finite=False)
        except LinAlgError as exc:
            raise NonConvergenceError(
                f"singular Jacobian: {exc}", norm, iterations
            ) from exc
        if not np.all(np.isfinite(step)):
            raise NonConvergenceError(
                "non-finite Newton step", norm, iterations
            )
        # an update collapsed to the float64 resolution of the iterate means
        # this is the representable root, even if the residual floor sits
        # above the tolerance; accept after the usual rearrangement
        stagnated = iterations > 0 and np.max(np.abs(step)) <= (
            16.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(u))))
        )
        u[1:-1] += step
        if rearrange:
            interior = u[1:-1]
            changed = False
            if bounds is not None and (
                interior.min() < bounds[0] or interior.max() > bounds[1]
            ):
                np.clip(interior, bounds[0], bounds[1], out=interior)
                changed = True
            if np.any(np.diff(interior) < 0):
                interior.sort()
                changed = True
            if changed:
                rearrangements += 1
        iterations += 1
        f = residual(u)
        norm = float(np.linalg.norm(f))
        if stagnated:
            break
    return u, StepReport(iterations, norm, rearrangements)
