from __future__ import annotations

import json

import numpy as np
import pytest

from slewkit.cli import EXIT_IO, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, main
from slewkit.trajectory import read_csv

from .test_config_io import REF_CONFIG, write_config


@pytest.fixture
def quick_config(tmp_path):
    """A small, fast maneuver for end-to-end CLI runs."""
    payload = json.loads(json.dumps(REF_CONFIG))
    payload["final"]["orientation"]["angle"] = 15.0
    payload["horizon"] = {"h": 0.1, "T": 6.0}
    payload["initial"]["momentum"] = [5.0, -3.0, 2.0]
    payload["bounds"] = {"c": [60.0, 60.0, 60.0], "b": [200.0, 200.0, 200.0]}
    payload["output"] = {"dir": str(tmp_path / "out")}
    return write_config(tmp_path, payload, "quick.json")


class TestSolveCommand:
    def test_end_to_end_artifacts(self, tmp_path, quick_config, capsys):
        rc = main(["solve", str(quick_config)])
        assert rc == EXIT_OK
        out = tmp_path / "out"
        for fname in ("trajectory.csv", "report.json", "controls.svg",
                      "momentum.svg", "costates.svg"):
            assert (out / fname).exists()
        report = json.loads((out / "report.json").read_text())
        assert report["converged"] is True
        assert report["final_residual_inf"] < 1e-8
        assert report["terminal_orientation_error_rad"] < 1e-6
        rec = read_csv(out / "trajectory.csv")
        assert rec.steps == 60
        assert np.all(np.abs(rec.u) <= 60.0 + 1e-12)

    def test_rerun_is_byte_identical(self, tmp_path, quick_config):
        assert main(["solve", str(quick_config)]) == EXIT_OK
        first = (tmp_path / "out" / "trajectory.csv").read_bytes()
        assert main(["solve", str(quick_config)]) == EXIT_OK
        assert (tmp_path / "out" / "trajectory.csv").read_bytes() == first

    def test_validation_exit_code(self, tmp_path):
        payload = json.loads(json.dumps(REF_CONFIG))
        del payload["bounds"]["b"]
        cfg = write_config(tmp_path, payload)
        assert main(["solve", str(cfg)]) == EXIT_VALIDATION

    def test_missing_file_is_io_error(self, tmp_path):
        assert main(["solve", str(tmp_path / "nope.json")]) == EXIT_IO

    def test_solver_failure_exit_code(self, tmp_path, quick_config):
        rc = main(["solve", str(quick_config), "--max-iter", "1",
                   "--out-dir", str(tmp_path / "fail_out")])
        assert rc == EXIT_SOLVER
        report = json.loads((tmp_path / "fail_out" / "report.json").read_text())
        assert report["error"]["type"] == "MaxIterationsExceeded"


class TestSimulateCommand:
    def test_solve_then_simulate_closure(self, tmp_path, quick_config):
        assert main(["solve", str(quick_config)]) == EXIT_OK
        out = tmp_path / "out"
        solved = read_csv(out / "trajectory.csv")
        sim_dir = tmp_path / "sim"
        rc = main([
            "simulate", str(quick_config),
            "--controls", str(out / "trajectory.csv"),
            "--out-dir", str(sim_dir),
        ])
        assert rc == EXIT_OK
        sim = read_csv(sim_dir / "trajectory.csv")
        assert np.max(np.abs(sim.Pi - solved.Pi)) < 1e-10
        assert np.max(np.abs(sim.quats - solved.quats)) < 1e-9

    def test_row_count_mismatch(self, tmp_path, quick_config):
        bad = tmp_path / "u.csv"
        bad.write_text("1,0,0\n0,1,0\n")
        rc = main(["simulate", str(quick_config), "--controls", str(bad)])
        assert rc == EXIT_VALIDATION

    def test_zero_controls_conserve_spatial_momentum(self, tmp_path, quick_config):
        zeros = tmp_path / "zeros.csv"
        zeros.write_text("\n".join("0,0,0" for _ in range(60)) + "\n")
        sim_dir = tmp_path / "sim0"
        rc = main(["simulate", str(quick_config), "--controls", str(zeros),
                   "--out-dir", str(sim_dir)])
        assert rc == EXIT_OK
        rec = read_csv(sim_dir / "trajectory.csv")
        from slewkit import quat_to_rotation

        spatial = np.array([
            quat_to_rotation(rec.quats[k]) @ rec.Pi[k] for k in range(rec.steps + 1)
        ])
        assert np.max(np.abs(spatial - spatial[0])) < 1e-10

    def test_overbound_controls_rejected(self, tmp_path, quick_config):
        bad = tmp_path / "big.csv"
        bad.write_text("\n".join("100,0,0" for _ in range(60)) + "\n")
        assert main(["simulate", str(quick_config), "--controls", str(bad)]) == EXIT_VALIDATION


class TestCheckCommand:
    def test_reports_model_quantities(self, capsys):
        rc = main(["check", "configs/slew90.json"])
        assert rc == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["Jd_diag"] == [700.0, 300.0, 500.0]
        thr = payload["trace_operator_invertibility_guarantee"]["cos_half_angle_threshold"]
        assert abs(thr - np.sqrt(1600.0 / 2400.0)) < 1e-12
        sweep = payload["free_motion_sweep"]
        assert sweep["steps"] == 190
        assert sweep["worst_trace_operator_cond"] > 1.0
        assert sweep["max_step_rotation_angle_rad"] < np.pi / 2

    def test_zero_momentum_condition_equals_inertia_cond(self, tmp_path, capsys):
        payload = json.loads(json.dumps(REF_CONFIG))
        payload["initial"]["momentum"] = [0.0, 0.0, 0.0]
        cfg = write_config(tmp_path, payload)
        assert main(["check", str(cfg)]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert abs(out["free_motion_sweep"]["worst_trace_operator_cond"] - 1200.0 / 800.0) < 1e-9


class TestPlotCommand:
    def test_plot_from_csv(self, tmp_path, quick_config):
        assert main(["solve", str(quick_config)]) == EXIT_OK
        plot_dir = tmp_path / "plots"
        rc = main(["plot", str(tmp_path / "out" / "trajectory.csv"),
                   "--out-dir", str(plot_dir)])
        assert rc == EXIT_OK
        svg = (plot_dir / "momentum.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg
