"""Command-line interface.

    slewkit solve    <config.json> [--tol X] [--max-iter N] [--damping D] [--out-dir DIR]
    slewkit simulate <config.json> --controls <csv> [--out-dir DIR]
    slewkit check    <config.json>
    slewkit plot     <trajectory.csv> [--out-dir DIR]

Exit codes: 0 success, 2 validation failure, 3 solver failure, 4 I/O failure.

`solve` writes trajectory.csv, report.json and the three SVG panels
(controls.svg, momentum.svg, costates.svg) into the output directory.
`simulate` forward-propagates a torque file through the discrete dynamics,
which makes for an end-to-end cross-check that solved controls reach the
target state. `check` prints model diagnostics as JSON. `plot` re-renders the
SVG panels from an existing trajectory file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ManeuverConfig, load_config
from .dynamics import (
    trace_operator_cos_threshold,
    propagate,
    solve_relative_rotation,
    trace_operator,
)
from .errors import (
    ParseError,
    SlewkitError,
    ValidationError,
)
from .shooting import (
    MaxIterationsExceeded,
    default_initial_guess,
    modified_shooting_solve,
    terminal_orientation_error,
)
from .so3 import log_map
from .svgplot import line_chart
from .trajectory import (
    TrajectoryRecord,
    from_simulation,
    from_solution,
    read_controls,
    read_csv,
    write_csv,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4

log = logging.getLogger("slewkit")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slewkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"slewkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve the constrained slew problem")
    ps.add_argument("config")
    ps.add_argument("--tol", type=float, default=None)
    ps.add_argument("--max-iter", type=int, default=None)
    ps.add_argument("--damping", type=float, default=None)
    ps.add_argument("--out-dir", default=None)

    pm = sub.add_parser("simulate", help="forward-propagate a torque file")
    pm.add_argument("config")
    pm.add_argument("--controls", required=True)
    pm.add_argument("--out-dir", default=None)

    pc = sub.add_parser("check", help="print model diagnostics as JSON")
    pc.add_argument("config")

    pp = sub.add_parser("plot", help="render SVG panels from a trajectory CSV")
    pp.add_argument("trajectory")
    pp.add_argument("--out-dir", default=None)
    return p


def _out_dir(arg: str | None, cfg: ManeuverConfig | None) -> Path:
    d = Path(arg if arg is not None else (cfg.out_dir if cfg is not None else "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_plots(record: TrajectoryRecord, cfg: ManeuverConfig | None, out: Path) -> None:
    tc = record.t[:-1]
    line_chart(
        out / "controls.svg",
        tc,
        [(f"u{i+1}", record.u[:, i]) for i in range(3)],
        "Torque",
        "u [N m]",
        guides=_bound_guides(cfg, "c"),
    )
    line_chart(
        out / "momentum.svg",
        record.t,
        [(f"Pi{i+1}", record.Pi[:, i]) for i in range(3)],
        "Body angular momentum",
        "Pi [N m s]",
        guides=_bound_guides(cfg, "b"),
    )
    if record.lam is not None:
        line_chart(
            out / "costates.svg",
            record.t,
            [(f"lam{i+1}", record.lam[:, i]) for i in range(3)],
            "Momentum costate (scaled)",
            "lam [N m]",
            guides=_bound_guides(cfg, "c"),
        )


def _bound_guides(cfg: ManeuverConfig | None, which: str) -> list[float] | None:
    if cfg is None:
        return None
    v = getattr(cfg.bounds, which)
    return sorted({float(x) for x in v} | {float(-x) for x in v})


def _cmd_solve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    tol = args.tol if args.tol is not None else cfg.tol
    max_iter = args.max_iter if args.max_iter is not None else cfg.max_iter
    damping = args.damping if args.damping is not None else cfg.damping
    out = _out_dir(args.out_dir, cfg)
    problem = cfg.problem()
    X0 = default_initial_guess(problem)

    try:
        X, active, report = modified_shooting_solve(
            X0, problem, tol=tol, max_iter=max_iter, damping=damping
        )
    except MaxIterationsExceeded as exc:
        payload = exc.report.to_dict() if hasattr(exc, "report") else {}
        payload["error"] = {"type": type(exc).__name__, "message": str(exc)}
        (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SlewkitError as exc:
        payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    record = from_solution(X, active, problem)
    write_csv(record, out / "trajectory.csv")
    payload = report.to_dict()
    payload["terminal_orientation_error_rad"] = terminal_orientation_error(X, problem)
    payload["terminal_momentum_error"] = float(
        np.linalg.norm(X.momenta[problem.N] - problem.Pi_f)
    )
    (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    _write_plots(record, cfg, out)
    print(
        f"converged in {report.iterations} iterations, "
        f"residual {report.final_residual_inf:.3e}, "
        f"orientation error {payload['terminal_orientation_error_rad']:.3e} rad"
    )
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out_dir, cfg)
    controls = read_controls(args.controls)
    if controls.shape[0] != cfg.N:
        raise ValidationError(
            "controls", f"expected {cfg.N} torque rows, got {controls.shape[0]}"
        )
    if np.any(np.abs(controls) > cfg.bounds.c + 1e-12):
        raise ValidationError("controls", "torque rows exceed the bound c")
    Rs, Pis, _ = propagate(cfg.R_i, cfg.Pi_i, controls, cfg.h, cfg.inertia)
    record = from_simulation(Rs, Pis, controls, cfg.h)
    write_csv(record, out / "trajectory.csv")
    _write_plots(record, cfg, out)
    final_ornt_err = float(np.linalg.norm(log_map(Rs[-1].T @ cfg.R_f)))
    print(
        f"simulated {cfg.N} steps: final momentum {Pis[-1].tolist()}, "
        f"orientation error vs target {final_ornt_err:.3e} rad"
    )
    return EXIT_OK


def _cmd_check(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    inertia = cfg.inertia
    threshold = trace_operator_cos_threshold(inertia)
    zero_u = np.zeros((cfg.N, 3))
    _, Pis, qs = propagate(cfg.R_i, cfg.Pi_i, zero_u, cfg.h, cfg.inertia)
    worst_cond = 0.0
    max_step_angle = 0.0
    max_h_pi = 0.0
    for k in range(cfg.N):
        sol = solve_relative_rotation(Pis[k], cfg.h, inertia)
        worst_cond = max(worst_cond, float(np.linalg.cond(trace_operator(sol.F, inertia))))
        max_step_angle = max(max_step_angle, float(np.linalg.norm(log_map(sol.F))))
        max_h_pi = max(max_h_pi, cfg.h * float(np.linalg.norm(Pis[k])))
    half_pi = float(np.pi / 2.0)
    guarantee_angle = float(2.0 * np.arccos(threshold))
    diagnostics = {
        "Jd_diag": inertia.jd_diag.tolist(),
        "trace_operator_invertibility_guarantee": {
            "cos_half_angle_threshold": threshold,
            "step_angle_bound_rad": guarantee_angle,
        },
        "free_motion_sweep": {
            "steps": cfg.N,
            "worst_trace_operator_cond": worst_cond,
            "max_step_rotation_angle_rad": max_step_angle,
            "max_h_momentum_norm": max_h_pi,
            "all_steps_within_guarantee": bool(max_step_angle < guarantee_angle),
            "skew_identifiability_bound_rad": half_pi,
            "step_angle_near_half_pi": bool(max_step_angle > 0.9 * half_pi),
        },
    }
    print(json.dumps(diagnostics, indent=2))
    return EXIT_OK


def _cmd_plot(args: argparse.Namespace) -> int:
    record = read_csv(args.trajectory)
    out = _out_dir(args.out_dir, None)
    _write_plots(record, None, out)
    print(f"wrote plots to {out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "simulate": _cmd_simulate,
        "check": _cmd_check,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except (ParseError, ValidationError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SlewkitError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
