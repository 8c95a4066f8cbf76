from __future__ import annotations

import numpy as np
import pytest

from slewkit import Bounds, InertiaModel, ManeuverProblem
from slewkit.so3 import exp_rodrigues

REF_AXIS = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture
def inertia_ref():
    return InertiaModel(Jx=800.0, Jy=1200.0, Jz=1000.0)


@pytest.fixture
def bounds_ref():
    return Bounds(c=np.array([20.0, 20.0, 20.0]), b=np.array([70.0, 70.0, 70.0]))


def random_rotation(rng, max_angle=np.pi - 0.2):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return exp_rodrigues(rng.uniform(0.0, max_angle) * axis)


def random_axis(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def reference_problem(inertia, bounds, N=190, angle_deg=90.0, h=0.1):
    """The benchmark slew: rotate angle_deg about (1,1,1)/sqrt(3), momentum
    (30, -10, 10) -> 0."""
    return ManeuverProblem(
        inertia=inertia,
        bounds=bounds,
        R_i=np.eye(3),
        R_f=exp_rodrigues(np.deg2rad(angle_deg) * REF_AXIS),
        Pi_i=np.array([30.0, -10.0, 10.0]),
        Pi_f=np.zeros(3),
        h=h,
        N=N,
    )


def small_problem(inertia, rng, N=6, c=20.0, b=70.0):
    """A random low-dimensional problem for Jacobian and residual tests."""
    return ManeuverProblem(
        inertia=inertia,
        bounds=Bounds(c=np.full(3, c), b=np.full(3, b)),
        R_i=random_rotation(rng, max_angle=1.0),
        R_f=random_rotation(rng, max_angle=1.0),
        Pi_i=rng.uniform(-20.0, 20.0, 3),
        Pi_f=rng.uniform(-20.0, 20.0, 3),
        h=0.1,
        N=N,
    )
