"""Tests for the command-line layer: config parsing, outputs, exit codes."""
import json
from pathlib import Path

import numpy as np
import pytest

from condensate_lab.cli import (
    EXIT_CONFIG,
    ConfigError,
    main,
    parse_config,
)
from condensate_lab.harness import preset

P6_TEXT = """
# supercritical radial run
gamma = 1
dim = 3
r1 = 1
n = 50001
tau = 5e-6
t_final = 0.25
eps = 1e-12
delta = 0
init = gaussian(10, 0.9)
"""

TINY_TEXT = """
gamma = 2.9
dim = 1
r1 = 1
n = 201
tau = 2e-3
t_final = 0.02
init = gaussian(1.5, 0.7)
"""


class TestParseConfig:
    def test_matches_preset_p6(self):
        run = parse_config(P6_TEXT)
        ref = preset("P6")
        assert run.solver_config() == ref.solver_config()
        assert run.datum.density()(np.array([0.3]))[0] == pytest.approx(
            ref.datum.density()(np.array([0.3]))[0]
        )

    def test_negative_gamma_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(TINY_TEXT.replace("gamma = 2.9", "gamma = -1"))

    def test_missing_init_rejected(self):
        text = "\n".join(
            line for line in TINY_TEXT.splitlines() if not line.startswith("init")
        )
        with pytest.raises(ConfigError, match="initial datum required"):
            parse_config(text)

    def test_unknown_key_carries_line_number(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("gamma = 2.9\nbogus = 1\n")

    def test_malformed_init(self):
        with pytest.raises(ConfigError):
            parse_config(TINY_TEXT.replace("gaussian(1.5, 0.7)", "uniform(3)"))


class TestSimulateCommand:
    def test_run_writes_outputs(self, tmp_path):
        cfg_file = tmp_path / "tiny.cfg"
        cfg_file.write_text(TINY_TEXT)
        out = tmp_path / "out"
        code = main(
            [
                "simulate",
                "--config",
                str(cfg_file),
                "--out",
                str(out),
                "--cadence",
                "1",
            ]
        )
        assert code == 0
        for name in ("entropy.csv", "condensate.csv", "minimizer.csv", "report.json"):
            assert (out / name).exists()
        entropy = np.loadtxt(out / "entropy.csv", delimiter=",", skiprows=1)
        assert entropy.shape[1] == 3
        assert np.all(np.diff(entropy[:, 1]) <= 1e-10)  # H non-increasing
        report = json.loads((out / "report.json").read_text())
        assert report["schema_version"] == 1
        assert report["exit_status"] == 0

    def test_byte_identical_reruns(self, tmp_path):
        cfg_file = tmp_path / "tiny.cfg"
        cfg_file.write_text(TINY_TEXT)
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["simulate", "--config", str(cfg_file), "--out", str(out)]) == 0
            outs.append(out)
        for name in ("entropy.csv", "condensate.csv", "report.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_missing_config_exits_3(self, tmp_path, capsys):
        code = main(["simulate", "--config", str(tmp_path / "missing.cfg")])
        assert code == EXIT_CONFIG

    def test_preset_and_config_conflict(self, tmp_path):
        cfg_file = tmp_path / "tiny.cfg"
        cfg_file.write_text(TINY_TEXT)
        code = main(
            ["simulate", "--preset", "P1", "--config", str(cfg_file), "--out", "x"]
        )
        assert code == EXIT_CONFIG


class TestConvergenceCommand:
    def test_matches_library_study(self, tmp_path, capsys):
        out = tmp_path / "conv"
        code = main(
            [
                "convergence",
                "--mode",
                "final1d",
                "--levels",
                "2",
                "--ref-cells",
                "200",
                "--steps",
                "20",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        from condensate_lab.harness import ConvergenceMode, self_convergence_1d

        direct = self_convergence_1d(
            preset("VAL1D"),
            2,
            ConvergenceMode.FINAL_TIME_L2,
            ref_cells=200,
            final_time_steps=20,
        )
        got = report["convergence"]["final1d"]["rows"]
        assert got[1]["error"] == pytest.approx(direct.rows[1].error, rel=1e-12)


class TestPresetsAndMinimizer:
    def test_presets_lists_all(self, capsys):
        assert main(["presets"]) == 0
        captured = capsys.readouterr().out
        for name in ("P1", "P7", "VAL2D-A"):
            assert name in captured

    def test_minimizer_supercritical(self, tmp_path, capsys):
        out = tmp_path / "mini"
        code = main(
            [
                "minimizer",
                "--mass",
                "2.59",
                "--gamma",
                "1",
                "--dim",
                "3",
                "--n",
                "501",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["theta"] == 0.0
        assert report["dirac_mass"] == pytest.approx(0.75, abs=0.01)
        values = np.loadtxt(out / "minimizer.csv", delimiter=",", skiprows=1)
        assert values[0, 1] == 0.0 and values[-1, 1] == 1.0
