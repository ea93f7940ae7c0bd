"""Shared fixtures: the expensive preset evolutions run once per session."""
import dataclasses

import numpy as np
import pytest

from condensate_lab.diagnostics import ObserverConfig
from condensate_lab.harness import build_initial_profile, preset
from condensate_lab.solver1d import evolve_1d
from condensate_lab.solver_radial import evolve_radial


def run_1d_preset(name, snapshot_times=(), cadence=1, **overrides):
    run = preset(name)
    profile = build_initial_profile(run)
    cfg = run.solver_config(**overrides)
    observers = ObserverConfig(cadence=cadence, snapshot_times=snapshot_times)
    trace, final = evolve_1d(profile, cfg, observers)
    return run, cfg, trace, final, profile


def run_radial_preset(name, snapshot_times=(), cadence=1, **overrides):
    run = preset(name)
    profile = build_initial_profile(
        run, overrides.get("n_points", run.n_points)
    )
    cfg = run.solver_config(**overrides)
    observers = ObserverConfig(cadence=cadence, snapshot_times=snapshot_times)
    trace, final = evolve_radial(profile, cfg, observers)
    return run, cfg, trace, final.profile, profile


@pytest.fixture(scope="session")
def p1_result():
    return run_1d_preset("P1", snapshot_times=(0.04, 0.1))


@pytest.fixture(scope="session")
def p3_result():
    return run_1d_preset("P3")


@pytest.fixture(scope="session")
def p4_result():
    # full-scale concentrated run: 400000 implicit steps on 10001 nodes;
    # this is the documented long pole of the acceptance suite
    return run_1d_preset("P4")


@pytest.fixture(scope="session")
def p5_result():
    return run_radial_preset("P5")


@pytest.fixture(scope="session")
def p6_scaled_result():
    # documented scaled-down supercritical radial run (full n=50001 is a
    # long-running reproduction, not a CI gate)
    return run_radial_preset(
        "P6", snapshot_times=(0.1, 0.2), cadence=5, n_points=5001, tau=5e-5
    )


@pytest.fixture(scope="session")
def p7_results():
    out = {}
    for delta in (1e-10, 0.0):
        out[delta] = run_radial_preset("P7", cadence=5, delta_reg=delta)
    return out
