"""Implicit Lagrangian (pseudo-inverse CDF) solvers for bosonic Fokker-Planck
equations, able to evolve solutions through and beyond finite-time
condensation."""

from .diagnostics import (
    ObserverConfig,
    TraceSet,
    blowup_profile_fit,
    condensate_size,
    decay_rate,
    entropy_1d,
    entropy_radial,
)
from .harness import (
    ConvergenceMode,
    ConvergenceReport,
    PresetRun,
    build_initial_profile,
    exact_convergence_2d,
    preset,
    self_convergence_1d,
)
from .model import (
    MinimizerSpec,
    ModelParams,
    SingularSteadyStateError,
    SupercriticalMassError,
    critical_mass,
    entropy_minimizer,
    phi,
    psi,
    steady_state_density,
    theta_for_mass,
)
from .newton import NonConvergenceError, StepReport
from .oracle2d import ExactSolution2D, Oracle2DConfig, choose_r1
from .solver1d import Integrator, SolverConfig, evolve_1d, solve_step_1d, step_cn_1d
from .solver_radial import RadialState, evolve_radial, solve_step_radial
from .transform import (
    Grid,
    InvalidDensityError,
    MassMismatchError,
    Profile,
    ProfileKind,
    density_from_profile,
    inverse_cdf_from_density,
    minimizer_profile,
)

__version__ = "0.1.0"
