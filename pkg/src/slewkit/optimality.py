"""Residuals and gradients of the first-order optimality conditions.

The solver works in reduced, step-length-scaled variables: per node k it
stores the momentum Pi_k and the scaled momentum costate lam_k (h times the
raw multiplier), plus one global rotation costate mu0. The optimal torque is
the closed-form clamp law

    u*_i = -min(c_i, |lam_i|) * sgn(lam_i),

so controls never appear as unknowns. Two residual families tie the unknowns
together:

    Sigma_{k+1} = Pi_{k+1} - F_k^T Pi_k - h u*(lam_k)
    Xi_k        = h beta_k ⊙ Pi_k - lam_{k-1}
                  + (F_k - h N_k hat(F_k^T Pi_k)) lam_k + N_k Q_k^T mu0

with N_k from sensitivity_matrices, Q_k = F_1 F_2 ... F_k, and beta_k >= 0
the multiplier of the momentum bound (zero when inactive). Boundary closure
adds the six momentum rows and the three-dimensional orientation defect

    C_ornt = vee(log(R_f^T R_i F_0 F_1 ... F_{N-1})),

which vanishes exactly when the relative rotations reach the target attitude.

Gradient caveat: the per-step "body-frame" orientation gradient (columns
vee(F_{N-1}^T ... F_k^T dF_k/dPi_k^i ...)) is the exact derivative of C_ornt
only on the constraint surface C_ornt = 0. Off the surface the exact
derivative carries the inverse right Jacobian of the log map as a prefactor;
`orientation_log_correction` supplies it and the shooting Jacobian applies it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import InertiaModel, sensitivity_matrices, solve_relative_rotation
from .errors import DivisionByZeroMomentum, ValidationError
from .so3 import hat, log_map, right_jacobian_inverse, vee


@dataclass(frozen=True)
class Bounds:
    """Per-axis torque bound c [N m] and momentum bound b [N m s]."""

    c: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("c", "b"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)) or np.any(v <= 0.0):
                raise ValidationError(name, f"must be 3 positive finite entries, got {v}")
            object.__setattr__(self, name, v)


def optimal_control(lambda_bar: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Clamp-law torque u*_i = -min(c_i, |lam_i|) sgn(lam_i).

    sgn(0) = 0, so a zero costate component gives zero torque. Saturated
    components land on +-c_i exactly (no rounding), which the active-set
    bookkeeping relies on.
    """
    lam = np.asarray(lambda_bar, dtype=float)
    return -np.minimum(bounds.c, np.abs(lam)) * np.sign(lam)


def control_generalized_gradient(lambda_bar: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Diagonal generalized gradient of the clamp law w.r.t. lam.

    Entry i is -1 where |lam_i| <= c_i and 0 where saturated. The boundary
    |lam_i| = c_i takes the -1 selection: any value in [-1, 0] is a valid
    generalized-gradient element there, and -1 keeps the Newton matrix
    better conditioned than 0.
    """
    lam = np.asarray(lambda_bar, dtype=float)
    return np.diag(np.where(np.abs(lam) <= bounds.c, -1.0, 0.0))


def sigma_residual(
    Pi_k: np.ndarray,
    Pi_k1: np.ndarray,
    lambda_bar_k: np.ndarray,
    h: float,
    inertia: InertiaModel,
    bounds: Bounds,
) -> np.ndarray:
    """Momentum matching defect Pi_{k+1} - F_k^T Pi_k - h u*(lam_k)."""
    F = solve_relative_rotation(Pi_k, h, inertia).F
    return (
        np.asarray(Pi_k1, dtype=float)
        - F.T @ np.asarray(Pi_k, dtype=float)
        - h * optimal_control(lambda_bar_k, bounds)
    )


def xi_residual(
    Pi_k1: np.ndarray,
    lambda_bar_k: np.ndarray,
    lambda_bar_k1: np.ndarray,
    mu_bar0: np.ndarray,
    Q_k1: np.ndarray,
    beta_k1: np.ndarray,
    h: float,
    inertia: InertiaModel,
) -> np.ndarray:
    """Reduced costate defect at node k+1.

    h beta ⊙ Pi - lam_k + (F - h N hat(F^T Pi)) lam_{k+1} + N Q^T mu0,
    everything evaluated at Pi_{k+1}. Pass beta = 0 for the inactive case.
    The caller supplies the accumulated product Q_{k+1} = F_1 ... F_{k+1}.
    """
    Pi = np.asarray(Pi_k1, dtype=float)
    F = solve_relative_rotation(Pi, h, inertia).F
    _, N = sensitivity_matrices(F, inertia, h)
    bracket = F - h * N @ hat(F.T @ Pi)
    return (
        h * np.asarray(beta_k1, dtype=float) * Pi
        - np.asarray(lambda_bar_k, dtype=float)
        + bracket @ np.asarray(lambda_bar_k1, dtype=float)
        + N @ np.asarray(Q_k1, dtype=float).T @ np.asarray(mu_bar0, dtype=float)
    )


def momentum_boundary_residual(
    Pi_0: np.ndarray, Pi_N: np.ndarray, Pi_i: np.ndarray, Pi_f: np.ndarray
) -> np.ndarray:
    """Stacked boundary defect (Pi_N - Pi_f, Pi_0 - Pi_i), shape (6,)."""
    return np.concatenate([
        np.asarray(Pi_N, dtype=float) - np.asarray(Pi_f, dtype=float),
        np.asarray(Pi_0, dtype=float) - np.asarray(Pi_i, dtype=float),
    ])


def orientation_constraint(
    R_i: np.ndarray, R_f: np.ndarray, F_seq: Sequence[np.ndarray]
) -> np.ndarray:
    """Orientation closure defect vee(log(R_f^T R_i F_0 ... F_{N-1})).

    Zero exactly when R_i F_0 ... F_{N-1} = R_f. Invariant under a common
    left rotation of R_i and R_f, since only R_f^T R_i enters.

    Raises:
        AngleNearPi: if the accumulated defect angle is within the log-map
            guard band of pi.
    """
    P = np.asarray(R_f, dtype=float).T @ np.asarray(R_i, dtype=float)
    for F in F_seq:
        P = P @ F
    return log_map(P)


def orientation_constraint_gradient(
    k: int,
    F_seq: Sequence[np.ndarray],
    dF_k: np.ndarray,
) -> np.ndarray:
    """Body-frame gradient block of the orientation constraint at node k.

    Column i is

        F_{N-1}^T F_{N-2}^T ... F_{k+1}^T vee(F_k^T dF_k/dPi_k^i),

    i.e. the tangent of the accumulated product pulled back to the final
    frame. This is the exact derivative of C_ornt on the constraint surface;
    away from it, left-multiply by orientation_log_correction(C_ornt).

    Args:
        k: node index in [0, N-1].
        F_seq: the relative rotations F_0 ... F_{N-1}.
        dF_k: sensitivities dF_k/dPi_k, shape (3, 3, 3) with leading axis i.
    """
    cols = np.empty((3, 3))
    trailing = np.eye(3)
    for F in F_seq[len(F_seq) - 1:k:-1]:
        trailing = trailing @ F.T
    # trailing = F_{N-1}^T ... F_{k+1}^T, accumulated right-to-left
    Fk = F_seq[k]
    for i in range(3):
        cols[:, i] = trailing @ vee_skew(Fk.T @ dF_k[i])
    return cols


def vee_skew(S: np.ndarray) -> np.ndarray:
    """vee of a matrix that is skew up to roundoff (no tolerance check)."""
    return np.array([
        (S[2, 1] - S[1, 2]) / 2.0,
        (S[0, 2] - S[2, 0]) / 2.0,
        (S[1, 0] - S[0, 1]) / 2.0,
    ])


def orientation_log_correction(C_ornt: np.ndarray) -> np.ndarray:
    """Prefactor turning body-frame gradient columns into exact derivatives
    of the log-map defect: the inverse right Jacobian at C_ornt. Equals the
    identity on the constraint surface."""
    return right_jacobian_inverse(C_ornt)


def compute_slack_beta(
    Pi_k: np.ndarray,
    lambda_bar_km1: np.ndarray,
    lambda_bar_k: np.ndarray,
    mu_bar0: np.ndarray,
    Q_k: np.ndarray,
    h: float,
    inertia: InertiaModel,
) -> np.ndarray:
    """Momentum-bound multipliers beta_k making the Xi row at node k vanish.

    From h beta ⊙ Pi + Xi(beta=0) = 0:

        beta_k^i = -Xi_k^i(beta=0) / (h Pi_k^i).

    Meaningful at components sitting on the bound (|Pi_k^i| = b_i, hence
    nonzero); the sign of the result decides whether that bound is active.

    Raises:
        DivisionByZeroMomentum: if any Pi_k^i is exactly zero.
    """
    Pi = np.asarray(Pi_k, dtype=float)
    if np.any(Pi == 0.0):
        raise DivisionByZeroMomentum(
            f"zero momentum component in {Pi.tolist()}; slack undefined there"
        )
    xi0 = xi_residual(
        Pi, lambda_bar_km1, lambda_bar_k, mu_bar0, Q_k, np.zeros(3), h, inertia
    )
    return -xi0 / (h * Pi)
