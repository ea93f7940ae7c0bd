"""Command-line entry point: run simulations and validation studies.

Subcommands
-----------
simulate     evolve a preset or a config file, writing traces and snapshots
validate1d   reproduce the 1D self-convergence tables (final-time,
             space-time and the second-order time stepper)
validate2d   reproduce the exact-solution validation tables (d = 2)
convergence  one convergence study by mode name
presets      list the preset catalogue
minimizer    entropy minimizer for a given mass

Every run writes machine-readable outputs into ``--out``:
``entropy.csv`` (t,H,H_relative), ``condensate.csv`` (t,x_p),
``profile_<t>.csv`` / ``density_<t>.csv`` per snapshot, ``minimizer.csv``
and a schema-versioned ``report.json``.  CSV numbers carry 17 significant
digits with ``.`` decimal separator, ``,`` field separator, ``\\n`` line
endings and a header row; identical invocations produce byte-identical
files.

Exit status: 0 success, 2 solver nonconvergence, 3 configuration error.
The environment variable ``CONDENSATE_LAB_THREADS`` caps parallel
convergence sub-runs (default: available cores).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
import warnings
from pathlib import Path

import numpy as np

from . import diagnostics
from .harness import (
    PRESET_NAMES,
    ConvergenceMode,
    InitialDatum,
    PresetRun,
    build_initial_profile,
    exact_convergence_2d,
    preset,
    self_convergence_1d,
)
from .model import ModelParams, critical_mass, entropy_minimizer
from .newton import NonConvergenceError
from .solver1d import Integrator, evolve_1d
from .solver_radial import evolve_radial
from .transform import Grid, density_from_profile, minimizer_profile

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_CONFIG = 3


class ConfigError(ValueError):
    pass


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = zip(*columns)
    with open(path, "w", newline="") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(x) for x in row) + "\n")


def write_report(out_dir: Path, report: dict) -> None:
    report["schema_version"] = SCHEMA_VERSION
    with open(out_dir / "report.json", "w") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")


# --- configuration files ----------------------------------------------------

_CONFIG_KEYS = {
    "gamma",
    "dim",
    "r1",
    "n",
    "tau",
    "t_final",
    "eps",
    "delta",
    "integrator",
    "init",
}

_INIT_RE = re.compile(r"^gaussian\(\s*([^)]*)\)$")


def parse_config(text: str) -> PresetRun:
    """Parse ``key = value`` configuration text into a run description.

    Keys: gamma, dim, r1, n, tau, t_final, eps, delta, integrator and
    ``init = gaussian(A, sigma[, v0, background])``.  Unknown keys and
    malformed values are errors carrying the line number.  Defaults:
    dim = 1, r1 = 1, eps = delta = 0, integrator = backward_euler.  For
    dim = 3 the Gaussian uses sigma as the variance, matching the preset
    catalogue.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value.strip()

    def need(key: str) -> str:
        if key not in values:
            if key == "init":
                raise ConfigError("initial datum required (init = gaussian(...))")
            raise ConfigError(f"missing required key {key!r}")
        return values[key]

    def as_float(key: str, default: float | None = None) -> float:
        raw = values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: not a number: {raw!r}") from exc

    gamma = as_float("gamma")
    if gamma <= 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    dim = int(as_float("dim", 1.0))
    if dim not in (1, 2, 3):
        raise ConfigError(f"dim must be 1, 2 or 3, got {dim}")
    r1 = as_float("r1", 1.0)
    if r1 <= 0:
        raise ConfigError(f"r1 must be positive, got {r1}")
    n = int(as_float("n"))
    if n < 3:
        raise ConfigError(f"n must be at least 3, got {n}")
    tau = as_float("tau")
    t_final = as_float("t_final")
    if tau <= 0 or t_final <= 0:
        raise ConfigError("tau and t_final must be positive")
    eps = as_float("eps", 0.0)
    delta = as_float("delta", 0.0)
    if eps < 0 or delta < 0:
        raise ConfigError("eps and delta must be nonnegative")

    integrator_raw = values.get("integrator", "backward_euler").lower()
    try:
        integrator = Integrator(integrator_raw)
    except ValueError as exc:
        valid = ", ".join(i.value for i in Integrator)
        raise ConfigError(
            f"unknown integrator {integrator_raw!r}; valid: {valid}"
        ) from exc

    init_raw = need("init")
    if not init_raw:
        raise ConfigError("initial datum required (init = gaussian(...))")
    match = _INIT_RE.match(init_raw)
    if not match:
        raise ConfigError(f"cannot parse init {init_raw!r}")
    try:
        args = [float(part) for part in match.group(1).split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse init arguments in {init_raw!r}") from exc
    if len(args) < 2 or len(args) > 4:
        raise ConfigError("init = gaussian(A, sigma[, v0, background])")
    amp, sigma = args[0], args[1]
    if amp <= 0 or sigma <= 0:
        raise ConfigError("gaussian amplitude and sigma must be positive")
    v0 = args[2] if len(args) > 2 else 0.0
    background = args[3] if len(args) > 3 else 0.0
    if background < 0:
        raise ConfigError("gaussian background must be nonnegative")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # gamma<=2 advisory handled at run time
        params = ModelParams(gamma=gamma, dim=dim, r1=r1)
    datum = InitialDatum(amp, sigma, v0, background, variance_form=(dim == 3))
    return PresetRun(
        "config", params, datum, n, tau, t_final, eps, delta, integrator
    )


# --- simulate ----------------------------------------------------------------


def _default_snapshot_times(run: PresetRun) -> tuple[float, ...]:
    t = run.t_final
    return (t / 4.0, t / 2.0, t)


def _fit_window(run: PresetRun) -> tuple[float, float]:
    # default window: clear of the condensate boundary, out to 0.2 r1
    return (0.02 * run.params.r1, 0.2 * run.params.r1)


def _decay_window(t_final: float) -> tuple[float, float]:
    # documented default, equal to (0.05, 0.35) for the T = 0.4 presets
    return (0.125 * t_final, 0.875 * t_final)


def simulate(run: PresetRun, out_dir: Path, cadence: int, snapshot_times) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    profile0 = build_initial_profile(run)
    cfg = run.solver_config()
    observers = diagnostics.ObserverConfig(
        cadence=cadence,
        snapshot_times=tuple(snapshot_times),
        auto_condensate_snapshots=True,
    )
    if run.params.dim == 1:
        trace, final = evolve_1d(profile0, cfg, observers)
        final_profile = final
    else:
        trace, final_state = evolve_radial(profile0, cfg, observers)
        final_profile = final_state.profile

    ts, hs = trace.entropy_arrays()
    write_csv(
        out_dir / "entropy.csv",
        ["t", "H", "H_relative"],
        [ts, hs, hs - trace.h_infinity],
    )
    tc, xc = trace.condensate_arrays()
    write_csv(out_dir / "condensate.csv", ["t", "x_p"], [tc, xc])

    snapshots = list(trace.snapshots) + [(cfg.n_steps * cfg.tau, final_profile)]
    seen = set()
    fits = []
    for t_snap, snap in snapshots:
        tag = f"{t_snap:g}"
        if tag in seen:
            continue
        seen.add(tag)
        write_csv(
            out_dir / f"profile_{tag}.csv",
            ["mass_coordinate", "value"],
            [snap.grid.nodes(), snap.values],
        )
        positions, density = density_from_profile(snap)
        write_csv(out_dir / f"density_{tag}.csv", ["v", "f"], [positions, density])
        threshold = cfg.resolved_condensate_threshold
        if diagnostics.condensate_size(snap, threshold) < 3 * snap.grid.spacing:
            continue  # no resolved condensate at this snapshot
        law = "difference" if run.params.dim == 1 else "ratio"
        try:
            window = _fit_window(run)
            c_tilde, r_squared = diagnostics.blowup_profile_fit(snap, window, law=law)
            pos, dens, ref = diagnostics.blowup_profile_samples(snap, window)
            fits.append(
                {
                    "time": t_snap,
                    "law": law,
                    "window": list(window),
                    "c_tilde": c_tilde,
                    "r_squared": r_squared,
                    "samples": [
                        [float(p), float(f / r)] for p, f, r in zip(pos, dens, ref)
                    ],
                }
            )
        except (ValueError, diagnostics.InsufficientSamplesError):
            pass  # no condensate at this snapshot

    spec = entropy_minimizer(run.mass(), run.params)
    floor = minimizer_profile(spec, Grid(run.n_points, run.mass()))
    write_csv(
        out_dir / "minimizer.csv",
        ["mass_coordinate", "value"],
        [floor.grid.nodes(), floor.values],
    )

    window = _decay_window(run.t_final)
    try:
        alpha = diagnostics.decay_rate(trace, window)
        decay = {"alpha": alpha, "window": list(window)}
    except diagnostics.WindowError as exc:
        decay = {"alpha": None, "window": list(window), "note": str(exc)}

    onset = offset = None
    baseline = xc[0] if xc.size else 0.0
    above = xc > baseline
    if above.any():
        onset = float(tc[above][0])
        last_above = tc[above][-1]
        later = tc > last_above
        if later.any():
            offset = float(tc[later][0])

    return {
        "command": "simulate",
        "config": run_description(run),
        "h_infinity": trace.h_infinity,
        "entropy_decay": decay,
        "condensate": {
            "baseline": float(baseline),
            "onset_time": onset,
            "offset_time": offset,
            "max_size": float(xc.max()) if xc.size else 0.0,
            "final_size": float(xc[-1]) if xc.size else 0.0,
        },
        "profile_fits": fits,
        "minimizer": {"theta": spec.theta, "dirac_mass": spec.dirac_mass},
    }


def run_description(run: PresetRun) -> dict:
    return {
        "name": run.name,
        "gamma": run.params.gamma,
        "dim": run.params.dim,
        "r1": run.params.r1,
        "n": run.n_points,
        "tau": run.tau,
        "t_final": run.t_final,
        "eps": run.eps_reg,
        "delta": run.delta_reg,
        "integrator": run.integrator.value,
        "init": dataclasses.asdict(run.datum),
        "mass": run.mass(),
    }


# --- command implementations --------------------------------------------------


def _load_run(args) -> PresetRun:
    if args.preset and args.config:
        raise ConfigError("pass either --preset or --config, not both")
    if args.preset:
        return preset(args.preset)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return parse_config(path.read_text())
    raise ConfigError("one of --preset or --config is required")


def cmd_simulate(args) -> int:
    run = _load_run(args)
    out_dir = Path(args.out or f"runs/{run.name.lower()}")
    snapshot_times = (
        [float(x) for x in args.snapshots.split(",") if x.strip()]
        if args.snapshots
        else _default_snapshot_times(run)
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        report = simulate(run, out_dir, args.cadence, snapshot_times)
    except NonConvergenceError as exc:
        write_report(
            out_dir,
            {
                "command": "simulate",
                "config": run_description(run),
                "errors": [f"nonconvergence at step {exc.step_index}: {exc}"],
                "exit_status": EXIT_NONCONVERGENCE,
            },
        )
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    report["errors"] = []
    report["exit_status"] = EXIT_OK
    write_report(out_dir, report)
    return EXIT_OK


_CONVERGENCE_MODES = {
    "final1d": ("1d", ConvergenceMode.FINAL_TIME_L2, Integrator.BACKWARD_EULER),
    "spacetime1d": ("1d", ConvergenceMode.SPACE_TIME_L2, Integrator.BACKWARD_EULER),
    "cn1d": ("1d", ConvergenceMode.SPACE_TIME_L2, Integrator.CRANK_NICOLSON),
    "final2d": ("2d", ConvergenceMode.FINAL_TIME_L2, None),
    "spacetime2d": ("2d", ConvergenceMode.SPACE_TIME_L2, None),
}


def _convergence_report(mode_name: str, args):
    kind, mode, integrator = _CONVERGENCE_MODES[mode_name]
    if kind == "1d":
        base = preset("VAL1D") if integrator is Integrator.BACKWARD_EULER else preset("P3")
        run = dataclasses.replace(base, integrator=integrator)
        return self_convergence_1d(
            run,
            args.levels,
            mode,
            ref_cells=args.ref_cells,
            final_time_steps=args.steps,
        )
    return exact_convergence_2d(args.levels, mode, final_time_steps=args.steps_2d)


def _write_convergence(out_dir: Path, reports: dict[str, object]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, report in reports.items():
        rows = report.rows
        write_csv(
            out_dir / f"convergence_{name}.csv",
            ["time_points", "mesh_size", "error", "rate"],
            [
                np.array([r.time_points for r in rows], dtype=float),
                np.array([r.mesh_size for r in rows], dtype=float),
                np.array([r.error for r in rows]),
                np.array(
                    [r.rate if r.rate is not None else np.nan for r in rows]
                ),
            ],
        )
    write_report(
        out_dir,
        {
            "command": "convergence",
            "convergence": {name: rep.to_dict() for name, rep in reports.items()},
            "errors": [],
            "exit_status": EXIT_OK,
        },
    )


def cmd_convergence(args) -> int:
    if args.mode not in _CONVERGENCE_MODES:
        raise ConfigError(
            f"unknown mode {args.mode!r}; valid: {', '.join(_CONVERGENCE_MODES)}"
        )
    report = _convergence_report(args.mode, args)
    out_dir = Path(args.out or f"runs/convergence_{args.mode}")
    _write_convergence(out_dir, {args.mode: report})
    for row in report.rows:
        rate = "-" if row.rate is None else f"{row.rate:.4f}"
        print(f"{row.time_points:>8} {row.mesh_size:>8} {row.error:.4e} {rate}")
    return EXIT_OK


def cmd_validate1d(args) -> int:
    reports = {}
    for name in ("final1d", "spacetime1d", "cn1d"):
        reports[name] = _convergence_report(name, args)
    out_dir = Path(args.out or "runs/validate1d")
    _write_convergence(out_dir, reports)
    for name, report in reports.items():
        rates = ", ".join(f"{r:.3f}" for r in report.rates())
        print(f"{name}: rates [{rates}]")
    return EXIT_OK


def cmd_validate2d(args) -> int:
    reports = {
        "final2d": exact_convergence_2d(
            args.levels, ConvergenceMode.FINAL_TIME_L2, final_time_steps=args.steps_2d
        ),
        "spacetime2d": exact_convergence_2d(
            args.levels, ConvergenceMode.SPACE_TIME_L2
        ),
    }
    out_dir = Path(args.out or "runs/validate2d")
    _write_convergence(out_dir, reports)
    for name, report in reports.items():
        rates = ", ".join(f"{r:.3f}" for r in report.rates())
        print(f"{name}: rates [{rates}]")
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in PRESET_NAMES:
        run = preset(name)
        datum = run.datum
        extra = f" v0={datum.v0:g} bg={datum.background:g}" if name == "P2" else ""
        print(
            f"{name:8s} gamma={run.params.gamma:g} dim={run.params.dim} "
            f"A={datum.amp:g} sigma={datum.sigma:g}{extra} T={run.t_final:g} "
            f"tau={run.tau:g} n={run.n_points} eps={run.eps_reg:g} "
            f"delta={run.delta_reg:g}"
        )
    return EXIT_OK


def cmd_minimizer(args) -> int:
    params = ModelParams(gamma=args.gamma, dim=args.dim, r1=args.r1)
    spec = entropy_minimizer(args.mass, params)
    grid = Grid(args.n, args.mass)
    profile = minimizer_profile(spec, grid)
    out_dir = Path(args.out or "runs/minimizer")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(
        out_dir / "minimizer.csv",
        ["mass_coordinate", "value"],
        [grid.nodes(), profile.values],
    )
    m_c = critical_mass(params)
    write_report(
        out_dir,
        {
            "command": "minimizer",
            "config": {
                "gamma": args.gamma,
                "dim": args.dim,
                "r1": args.r1,
                "mass": args.mass,
                "n": args.n,
            },
            "critical_mass": m_c if np.isfinite(m_c) else "infinite",
            "theta": spec.theta,
            "dirac_mass": spec.dirac_mass,
            "errors": [],
            "exit_status": EXIT_OK,
        },
    )
    print(f"theta={spec.theta:.12g} dirac_mass={spec.dirac_mass:.12g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condensate-lab",
        description="Implicit Lagrangian solvers for bosonic Fokker-Planck models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one evolution")
    sim.add_argument("--preset", choices=PRESET_NAMES)
    sim.add_argument("--config", help="path to a key = value configuration file")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--cadence", type=int, default=10, help="steps between samples")
    sim.add_argument("--snapshots", help="comma-separated snapshot times")
    sim.set_defaults(fn=cmd_simulate)

    v1 = sub.add_parser("validate1d", help="1D self-convergence tables")
    v1.add_argument("--levels", type=int, default=4)
    v1.add_argument("--ref-cells", type=int, default=3200)
    v1.add_argument("--steps", type=int, default=500)
    v1.add_argument("--out")
    v1.set_defaults(fn=cmd_validate1d)

    v2 = sub.add_parser("validate2d", help="2D exact-solution tables")
    v2.add_argument("--levels", type=int, default=4)
    v2.add_argument("--steps-2d", type=int, default=4000)
    v2.add_argument("--out")
    v2.set_defaults(fn=cmd_validate2d)

    conv = sub.add_parser("convergence", help="one convergence study")
    conv.add_argument("--mode", required=True, choices=sorted(_CONVERGENCE_MODES))
    conv.add_argument("--levels", type=int, default=4)
    conv.add_argument("--ref-cells", type=int, default=3200)
    conv.add_argument("--steps", type=int, default=500)
    conv.add_argument("--steps-2d", type=int, default=4000)
    conv.add_argument("--out")
    conv.set_defaults(fn=cmd_convergence)

    pre = sub.add_parser("presets", help="list the preset catalogue")
    pre.set_defaults(fn=cmd_presets)

    mini = sub.add_parser("minimizer", help="entropy minimizer for a mass")
    mini.add_argument("--mass", type=float, required=True)
    mini.add_argument("--gamma", type=float, required=True)
    mini.add_argument("--dim", type=int, default=1)
    mini.add_argument("--r1", type=float, default=1.0)
    mini.add_argument("--n", type=int, default=2001)
    mini.add_argument("--out")
    mini.set_defaults(fn=cmd_minimizer)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
