"""Trajectory records and their CSV round trip.

One row per time node k = 0..N with the fixed column schema

    t, Pi1, Pi2, Pi3, u1, u2, u3, lam1, lam2, lam3,
    q0, q1, q2, q3, active1, active2, active3

where q is the accumulated orientation R_k as a scalar-first unit quaternion
and active_i is 0 (bound inactive), 1 (upper contact) or -1 (lower contact).
Controls exist for k < N, so the last row leaves the u fields empty; records
from plain simulation leave lam and active empty everywhere.

Numbers are written with 17 significant digits, enough for a lossless
float64 round trip, and the writer is deterministic: identical data produces
byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .optimality import optimal_control
from .shooting import ActiveSet, ManeuverProblem, ShootingVector, _Trajectory
from .so3 import rotation_to_quat

CSV_COLUMNS = [
    "t", "Pi1", "Pi2", "Pi3", "u1", "u2", "u3", "lam1", "lam2", "lam3",
    "q0", "q1", "q2", "q3", "active1", "active2", "active3",
]


@dataclass
class TrajectoryRecord:
    """Arrays of one discrete trajectory; lam/active may be None (simulation)."""

    t: np.ndarray                  # (N+1,)
    Pi: np.ndarray                 # (N+1, 3)
    u: np.ndarray                  # (N, 3)
    quats: np.ndarray              # (N+1, 4)
    lam: np.ndarray | None = None  # (N+1, 3)
    active: np.ndarray | None = None  # (N+1, 3) ints

    @property
    def steps(self) -> int:
        return self.t.shape[0] - 1


def from_solution(
    X: ShootingVector, active: ActiveSet, problem: ManeuverProblem
) -> TrajectoryRecord:
    """Assemble the record of a converged shooting vector."""
    N, h = problem.N, problem.h
    traj = _Trajectory(X.momenta, problem)
    quats = np.empty((N + 1, 4))
    R = problem.R_i.copy()
    quats[0] = rotation_to_quat(R)
    for k in range(N):
        R = R @ traj.F[k]
        quats[k + 1] = rotation_to_quat(R)
    u = optimal_control(X.costates[:N], problem.bounds)
    return TrajectoryRecord(
        t=h * np.arange(N + 1),
        Pi=X.momenta.copy(),
        u=u,
        quats=quats,
        lam=X.costates.copy(),
        active=active.flags.astype(int),
    )


def from_simulation(
    Rs: np.ndarray, Pis: np.ndarray, controls: np.ndarray, h: float
) -> TrajectoryRecord:
    """Assemble the record of a forward propagation (no costates)."""
    N = controls.shape[0]
    quats = np.array([rotation_to_quat(Rs[k]) for k in range(N + 1)])
    return TrajectoryRecord(
        t=h * np.arange(N + 1),
        Pi=np.asarray(Pis, dtype=float),
        u=np.asarray(controls, dtype=float),
        quats=quats,
    )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv(record: TrajectoryRecord, path: str | Path) -> None:
    N = record.steps
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for k in range(N + 1):
            row = [_fmt(record.t[k])]
            row += [_fmt(v) for v in record.Pi[k]]
            if k < N:
                row += [_fmt(v) for v in record.u[k]]
            else:
                row += ["", "", ""]
            if record.lam is not None:
                row += [_fmt(v) for v in record.lam[k]]
            else:
                row += ["", "", ""]
            row += [_fmt(v) for v in record.quats[k]]
            if record.active is not None:
                row += [str(int(v)) for v in record.active[k]]
            else:
                row += ["", "", ""]
            writer.writerow(row)


def read_csv(path: str | Path) -> TrajectoryRecord:
    """Read a trajectory written by write_csv."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ValidationError("trajectory", f"unexpected CSV header {header}")
        rows = [row for row in reader if row]
    n_rows = len(rows)
    if n_rows < 2:
        raise ValidationError("trajectory", f"need at least 2 rows, got {n_rows}")
    t = np.array([float(r[0]) for r in rows])
    Pi = np.array([[float(v) for v in r[1:4]] for r in rows])
    u = np.array([[float(v) for v in r[4:7]] for r in rows[:-1]])
    if any(v != "" for v in rows[-1][4:7]):
        raise ValidationError("trajectory", "last row must leave control fields empty")
    has_lam = rows[0][7] != ""
    lam = np.array([[float(v) for v in r[7:10]] for r in rows]) if has_lam else None
    quats = np.array([[float(v) for v in r[10:14]] for r in rows])
    has_active = rows[0][14] != ""
    active = (
        np.array([[int(v) for v in r[14:17]] for r in rows]) if has_active else None
    )
    return TrajectoryRecord(t=t, Pi=Pi, u=u, quats=quats, lam=lam, active=active)


def read_controls(path: str | Path, field: str = "controls") -> np.ndarray:
    """Extract torque rows from a controls file.

    Accepts either a full trajectory CSV (u columns are used; the final
    empty-control row is skipped) or a headerless CSV of 3 numbers per row.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise ValidationError(field, "empty controls file")
    if rows[0] == CSV_COLUMNS:
        data = []
        for r in rows[1:]:
            if all(v != "" for v in r[4:7]):
                data.append([float(v) for v in r[4:7]])
        if not data:
            raise ValidationError(field, "no control rows in trajectory file")
        return np.array(data)
    try:
        return np.array([[float(v) for v in r[:3]] for r in rows])
    except ValueError as exc:
        raise ValidationError(field, f"cannot parse controls file: {exc}") from exc
