"""Figure panels built from a condensate-lab run directory.

Every number displayed is read from the run's ``report.json`` and CSV files;
nothing is recomputed here, so the panels cannot drift from the simulation's
own outputs.  Rendering is read-only over the run directory and idempotent.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

EXPECTED_SCHEMA = 1


class SchemaError(RuntimeError):
    """The run directory is missing or carries an incompatible schema."""


class Panel(Enum):
    PROFILE_VS_MINIMIZER = "profile_vs_minimizer"
    RELATIVE_ENTROPY = "relative_entropy"
    DIRAC_PART = "dirac_part"
    NEAR_SINGULARITY = "near_singularity"


@dataclass
class PanelSpec:
    panel: Panel
    run_dir: Path
    out_dir: Path | None = None
    style: dict = field(default_factory=dict)


def load_report(run_dir: Path) -> dict:
    path = Path(run_dir) / "report.json"
    if not path.exists():
        raise SchemaError(
            f"{run_dir} has no report.json (expected schema_version {EXPECTED_SCHEMA})"
        )
    report = json.loads(path.read_text())
    version = report.get("schema_version")
    if version != EXPECTED_SCHEMA:
        raise SchemaError(
            f"report.json has schema_version {version}, expected {EXPECTED_SCHEMA}"
        )
    return report


def read_csv_columns(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    data = np.asarray(rows) if rows else np.empty((0, len(header)))
    return {name: data[:, k] for k, name in enumerate(header)}


def slope_annotation(report: dict) -> str:
    """Annotation text for the fitted decay rate; digits come straight from
    the report so figure and report can never disagree."""
    alpha = report.get("entropy_decay", {}).get("alpha")
    if alpha is None:
        return "alpha = n/a"
    return f"alpha = {alpha:.6g}"


def _save(fig, out_dir: Path, name: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for suffix in ("png", "svg"):
        path = out_dir / f"{name}.{suffix}"
        fig.savefig(path, bbox_inches="tight")
        paths.append(path)
    plt.close(fig)
    return paths


def _latest_profile(run_dir: Path) -> tuple[float, Path]:
    candidates = []
    for path in run_dir.glob("profile_*.csv"):
        stem = path.stem.removeprefix("profile_")
        try:
            candidates.append((float(stem), path))
        except ValueError:
            continue
    if not candidates:
        raise SchemaError(f"{run_dir} contains no profile_<t>.csv files")
    return max(candidates)


def render_profile_vs_minimizer(run_dir: Path, out_dir: Path) -> list[Path]:
    t_final, path = _latest_profile(run_dir)
    profile = read_csv_columns(path)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(
        profile["mass_coordinate"], profile["value"], label=f"profile at t={t_final:g}"
    )
    minimizer_path = run_dir / "minimizer.csv"
    if minimizer_path.exists():
        minimizer = read_csv_columns(minimizer_path)
        ax.plot(
            minimizer["mass_coordinate"],
            minimizer["value"],
            "--",
            label="entropy minimizer",
        )
    ax.set_xlabel("mass coordinate")
    ax.set_ylabel("profile value")
    ax.legend()
    return _save(fig, out_dir, "profile_vs_minimizer")


def render_relative_entropy(run_dir: Path, out_dir: Path, report: dict) -> list[Path]:
    entropy = read_csv_columns(run_dir / "entropy.csv")
    t = entropy["t"]
    rel = entropy["H_relative"]
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    positive = rel > 0
    ax.semilogy(t[positive], rel[positive], label="relative entropy")
    decay = report.get("entropy_decay", {})
    alpha = decay.get("alpha")
    if alpha is not None:
        lo, hi = decay.get("window", (t[positive][0], t[positive][-1]))
        anchor_mask = positive & (t >= lo) & (t <= hi)
        if anchor_mask.any():
            t0 = t[anchor_mask][0]
            c0 = rel[anchor_mask][0]
            ts = np.linspace(lo, hi, 50)
            ax.semilogy(
                ts, c0 * np.exp(-alpha * (ts - t0)), "r-", label=slope_annotation(report)
            )
    ax.annotate(
        slope_annotation(report),
        xy=(0.55, 0.85),
        xycoords="axes fraction",
        color="red",
    )
    ax.set_xlabel("t")
    ax.set_ylabel("H(t) - H_inf")
    ax.legend(loc="lower left")
    return _save(fig, out_dir, "relative_entropy")


def render_dirac_part(run_dir: Path, out_dir: Path) -> list[Path]:
    condensate = read_csv_columns(run_dir / "condensate.csv")
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    if condensate["t"].size == 0:
        ax.axhline(0.0, color="C0")
    else:
        ax.plot(condensate["t"], condensate["x_p"])
    ax.set_xlabel("t")
    ax.set_ylabel("condensate size x_p")
    return _save(fig, out_dir, "dirac_part")


def render_near_singularity(run_dir: Path, out_dir: Path, report: dict) -> list[Path]:
    fits = report.get("profile_fits", [])
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    if not fits:
        ax.annotate(
            "no condensate snapshots in this run",
            xy=(0.5, 0.5),
            xycoords="axes fraction",
            ha="center",
        )
    for fit in fits:
        samples = np.asarray(fit.get("samples", []))
        if samples.size == 0:
            continue
        label = (
            f"t={fit['time']:g}: c={fit['c_tilde']:.3g}, r2={fit['r_squared']:.4f}"
        )
        ax.plot(samples[:, 0], samples[:, 1], label=label)
        if fit.get("law") == "ratio":
            v = np.linspace(samples[0, 0], samples[-1, 0], 50)
            ax.plot(v, 1.0 + fit["c_tilde"] * v, "k--", lw=0.8)
    ax.set_xlabel("|v|")
    ax.set_ylabel("f / f_c")
    if fits:
        ax.legend(fontsize=8)
    return _save(fig, out_dir, "near_singularity")


def render(spec: PanelSpec) -> list[Path]:
    """Render one panel; returns the written image paths (PNG and SVG)."""
    run_dir = Path(spec.run_dir)
    report = load_report(run_dir)
    out_dir = Path(spec.out_dir) if spec.out_dir else run_dir / "figures"
    if spec.panel is Panel.PROFILE_VS_MINIMIZER:
        return render_profile_vs_minimizer(run_dir, out_dir)
    if spec.panel is Panel.RELATIVE_ENTROPY:
        return render_relative_entropy(run_dir, out_dir, report)
    if spec.panel is Panel.DIRAC_PART:
        return render_dirac_part(run_dir, out_dir)
    if spec.panel is Panel.NEAR_SINGULARITY:
        return render_near_singularity(run_dir, out_dir, report)
    raise ValueError(f"unknown panel {spec.panel}")


def render_all(run_dir: Path, out_dir: Path | None = None) -> list[Path]:
    paths = []
    for panel in Panel:
        paths.extend(render(PanelSpec(panel, Path(run_dir), out_dir)))
    return paths
