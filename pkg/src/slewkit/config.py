"""Maneuver configuration: JSON schema, validation, defaults.

A config file is one JSON document:

    {
      "inertia": {"Jx": 800.0, "Jy": 1200.0, "Jz": 1000.0},
      "initial": {
        "orientation": "identity",
        "momentum": [30.0, -10.0, 10.0]
      },
      "final": {
        "orientation": {"axis": [1, 1, 1], "angle": 90.0, "unit": "deg"},
        "momentum": [0.0, 0.0, 0.0]
      },
      "horizon": {"h": 0.1, "T": 19.0},
      "bounds": {"c": [20.0, 20.0, 20.0], "b": [70.0, 70.0, 70.0]},
      "solver": {"tol": 1e-8, "max_iter": 200, "damping": 1.0},
      "output": {"dir": "out"}
    }

Orientations are "identity", an axis-angle object (unit "rad" unless stated
"deg"; the axis is normalized on load, with a logged notice if it was not
unit), or {"quaternion": [q0, q1, q2, q3]} scalar-first. The horizon takes
either a step count "N" or a total time "T" with N = round(T / h). "solver"
and "output" are optional; angles are radians internally.

c is the per-axis torque bound [N m], b the per-axis momentum bound [N m s].
Boundary momenta outside the momentum box are rejected here, before any
solve is attempted.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import InertiaModel
from .errors import ParseError, ValidationError
from .optimality import Bounds
from .shooting import DEFAULT_MAX_ITER, DEFAULT_TOL, ManeuverProblem
from .so3 import exp_rodrigues, quat_to_rotation

logger = logging.getLogger("slewkit")


@dataclass(frozen=True)
class ManeuverConfig:
    """Validated problem data plus solver and output settings."""

    inertia: InertiaModel
    R_i: np.ndarray
    R_f: np.ndarray
    Pi_i: np.ndarray
    Pi_f: np.ndarray
    h: float
    N: int
    bounds: Bounds
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    damping: float = 1.0
    out_dir: str = "."

    def problem(self) -> ManeuverProblem:
        return ManeuverProblem(
            inertia=self.inertia,
            bounds=self.bounds,
            R_i=self.R_i,
            R_f=self.R_f,
            Pi_i=self.Pi_i,
            Pi_f=self.Pi_f,
            h=self.h,
            N=self.N,
        )


def _require(mapping: dict, key: str, context: str) -> object:
    if key not in mapping:
        raise ValidationError(key, f"missing from '{context}' section")
    return mapping[key]


def _vec3(value: object, field: str) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValidationError(field, f"expected 3 finite numbers, got {value!r}")
    return v


def _orientation(value: object, field: str) -> np.ndarray:
    if value == "identity" or value is None:
        return np.eye(3)
    if not isinstance(value, dict):
        raise ValidationError(field, f"expected 'identity', axis-angle or quaternion, got {value!r}")
    if "quaternion" in value:
        q = np.asarray(value["quaternion"], dtype=float)
        if q.shape != (4,) or not np.all(np.isfinite(q)):
            raise ValidationError(field, "quaternion must be 4 finite numbers")
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > 1e-6:
            raise ValidationError(field, f"quaternion norm {norm:.8f} too far from 1")
        return quat_to_rotation(q / norm)
    axis = _vec3(_require(value, "axis", field), f"{field}.axis")
    angle = float(_require(value, "angle", field))
    unit = value.get("unit", "rad")
    if unit == "deg":
        angle = np.deg2rad(angle)
    elif unit != "rad":
        raise ValidationError(field, f"unit must be 'rad' or 'deg', got {unit!r}")
    norm = float(np.linalg.norm(axis))
    if norm == 0.0:
        raise ValidationError(field, "axis must be nonzero")
    if abs(norm - 1.0) > 1e-12:
        logger.info("%s: axis %s normalized to unit length", field, axis.tolist())
        axis = axis / norm
    return exp_rodrigues(angle * axis)


def load_config(path: str | Path) -> ManeuverConfig:
    """Parse and validate a maneuver config file.

    Raises:
        ParseError: malformed JSON, with line/column in the message.
        ValidationError: a violated invariant, naming the field.
        OSError: unreadable path (propagated for the CLI's I/O exit code).
    """
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("root", "config must be a JSON object")

    inertia_raw = _require(raw, "inertia", "root")
    inertia = InertiaModel(
        Jx=float(_require(inertia_raw, "Jx", "inertia")),
        Jy=float(_require(inertia_raw, "Jy", "inertia")),
        Jz=float(_require(inertia_raw, "Jz", "inertia")),
    )

    initial = _require(raw, "initial", "root")
    final = _require(raw, "final", "root")
    R_i = _orientation(initial.get("orientation"), "initial.orientation")
    R_f = _orientation(final.get("orientation"), "final.orientation")
    Pi_i = _vec3(_require(initial, "momentum", "initial"), "initial.momentum")
    Pi_f = _vec3(_require(final, "momentum", "final"), "final.momentum")

    horizon = _require(raw, "horizon", "root")
    h = float(_require(horizon, "h", "horizon"))
    if not np.isfinite(h) or h <= 0.0:
        raise ValidationError("h", f"step length must be positive, got {h}")
    if "N" in horizon:
        N = int(horizon["N"])
    elif "T" in horizon:
        T = float(horizon["T"])
        if not np.isfinite(T) or T <= 0.0:
            raise ValidationError("T", f"time duration must be positive, got {T}")
        N = int(round(T / h))
    else:
        raise ValidationError("horizon", "need either 'N' or 'T'")
    if N < 2:
        raise ValidationError("N", f"need at least 2 steps, got {N}")

    bounds_raw = _require(raw, "bounds", "root")
    bounds = Bounds(
        c=_vec3(_require(bounds_raw, "c", "bounds"), "c"),
        b=_vec3(_require(bounds_raw, "b", "bounds"), "b"),
    )
    for name, Pi in (("initial.momentum", Pi_i), ("final.momentum", Pi_f)):
        if np.any(np.abs(Pi) > bounds.b):
            raise ValidationError(
                name, f"{Pi.tolist()} violates the momentum bound {bounds.b.tolist()}"
            )

    solver = raw.get("solver", {})
    tol = float(solver.get("tol", DEFAULT_TOL))
    max_iter = int(solver.get("max_iter", DEFAULT_MAX_ITER))
    damping = float(solver.get("damping", 1.0))
    if tol <= 0.0:
        raise ValidationError("tol", f"must be positive, got {tol}")
    if max_iter < 1:
        raise ValidationError("max_iter", f"must be at least 1, got {max_iter}")
    if not 0.0 < damping <= 1.0:
        raise ValidationError("damping", f"must be in (0, 1], got {damping}")

    out_dir = str(raw.get("output", {}).get("dir", "."))

    return ManeuverConfig(
        inertia=inertia,
        R_i=R_i,
        R_f=R_f,
        Pi_i=Pi_i,
        Pi_f=Pi_f,
        h=h,
        N=N,
        bounds=bounds,
        tol=tol,
        max_iter=max_iter,
        damping=damping,
        out_dir=out_dir,
    )
