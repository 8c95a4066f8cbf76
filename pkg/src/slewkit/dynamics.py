"""Discrete-time rigid-body attitude model in momentum variables.

The state is the pair (R_k, Pi_k): orientation matrix and body angular
momentum. One step of the dynamics is

    R_{k+1}  = R_k F_k
    Pi_{k+1} = F_k^T Pi_k + h u_k

where the relative rotation F_k is determined implicitly by the momentum
through

    hat(h Pi_k) = F_k Jd - Jd F_k^T,                                   (*)

with Jd the diagonal nonstandard inertia built from the principal moments.
This update conserves spatial angular momentum R_k Pi_k exactly under zero
torque, which makes it a sharp internal consistency check.

(*) is solved by parameterizing F_k with a unit quaternion q and running
Newton on the 4-equation system g(q, Pi) = 0 (three momentum-matching rows
plus the unit-norm row). The same implicit function provides exact momentum
sensitivities dq/dPi and dF/dPi by linear solves, no differencing involved.

All solves use pivoted dense factorizations; singularity raises, it is never
regularized away. Functions are pure, so independent time nodes may be
evaluated concurrently by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NewtonDiverged,
    SingularNewtonStep,
    SingularTraceOperator,
    ValidationError,
)
from .so3 import hat, quat_to_rotation_unchecked

# Absolute residual tolerance and iteration cap for the 4x4 implicit solve.
# The system is tiny and Newton is quadratic, so this is cheap insurance.
IMPLICIT_TOL = 1e-12
IMPLICIT_MAX_ITER = 50

# trace(F Jd) I - F Jd counts as invertible below this condition number.
TRACE_OPERATOR_COND_LIMIT = 1e12

_IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class InertiaModel:
    """Principal moments of inertia and the derived diagonal matrices.

    J  = diag(Jx, Jy, Jz)                          [kg m^2]
    Jd = diag(-Jx+Jy+Jz, Jx-Jy+Jz, Jx+Jy-Jz) / 2   [kg m^2]

    The triangle inequalities Jx + Jy > Jz (cyclic) are required so that all
    Jd entries are positive; they hold for any physical rigid body.
    """

    Jx: float
    Jy: float
    Jz: float

    def __post_init__(self):
        for name in ("Jx", "Jy", "Jz"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValidationError(name, f"principal moment must be positive, got {v}")
        d = self.jd_diag
        if np.any(d <= 0.0):
            raise ValidationError(
                "inertia", f"triangle inequality violated: Jd diagonal {d.tolist()}"
            )

    @property
    def j_diag(self) -> np.ndarray:
        return np.array([self.Jx, self.Jy, self.Jz])

    @property
    def jd_diag(self) -> np.ndarray:
        return 0.5 * np.array([
            -self.Jx + self.Jy + self.Jz,
            self.Jx - self.Jy + self.Jz,
            self.Jx + self.Jy - self.Jz,
        ])

    @property
    def J(self) -> np.ndarray:
        return np.diag(self.j_diag)

    @property
    def Jd(self) -> np.ndarray:
        return np.diag(self.jd_diag)


@dataclass(frozen=True)
class DynamicsState:
    """Orientation matrix and body angular momentum at one time node."""

    R: np.ndarray
    Pi: np.ndarray


@dataclass(frozen=True)
class RelativeRotationSolution:
    """Converged solution of the implicit relation hat(h Pi) = F Jd - Jd F^T.

    F is quat_to_rotation(q) exactly; residual_norm is the final max-norm of
    the 4-vector g(q, Pi).
    """

    F: np.ndarray
    q: np.ndarray
    newton_iters: int
    residual_norm: float


def _g_residual(q: np.ndarray, hPi: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Batched residual of the quaternion system, shapes (K,4),(K,3) -> (K,4)."""
    q0, q1, q2, q3 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    Jx, Jy, Jz = J
    return np.stack([
        2*q2*q3*(Jz - Jy) + 2*q0*q1*Jx - hPi[:, 0],
        2*q1*q3*(Jx - Jz) + 2*q0*q2*Jy - hPi[:, 1],
        2*q1*q2*(Jy - Jx) + 2*q0*q3*Jz - hPi[:, 2],
        q0*q0 + q1*q1 + q2*q2 + q3*q3 - 1.0,
    ], axis=1)


def _g_jacobian(q: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Batched 4x4 Jacobian dg/dq, shape (K,4,4)."""
    q0, q1, q2, q3 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    Jx, Jy, Jz = J
    K = q.shape[0]
    Jg = np.empty((K, 4, 4))
    Jg[:, 0, 0] = 2*q1*Jx
    Jg[:, 0, 1] = 2*q0*Jx
    Jg[:, 0, 2] = 2*q3*(Jz - Jy)
    Jg[:, 0, 3] = 2*q2*(Jz - Jy)
    Jg[:, 1, 0] = 2*q2*Jy
    Jg[:, 1, 1] = 2*q3*(Jx - Jz)
    Jg[:, 1, 2] = 2*q0*Jy
    Jg[:, 1, 3] = 2*q1*(Jx - Jz)
    Jg[:, 2, 0] = 2*q3*Jz
    Jg[:, 2, 1] = 2*q2*(Jy - Jx)
    Jg[:, 2, 2] = 2*q1*(Jy - Jx)
    Jg[:, 2, 3] = 2*q0*Jz
    Jg[:, 3, 0] = 2*q0
    Jg[:, 3, 1] = 2*q1
    Jg[:, 3, 2] = 2*q2
    Jg[:, 3, 3] = 2*q3
    return Jg


def solve_quaternions_batch(
    Pis: np.ndarray,
    h: float,
    inertia: InertiaModel,
    q_init: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve the implicit quaternion system at every row of Pis.

    Newton with masked updates: a node stops moving once its residual is
    below IMPLICIT_TOL, so the batch result is identical to solving nodes
    one at a time. Converged quaternions are sign-canonicalized to q0 >= 0
    (g is even in q, so the flip preserves the residual).

    Returns:
        (q, iters, residual) with shapes (K,4), (K,), (K,).

    Raises:
        NewtonDiverged, SingularNewtonStep
    """
    Pis = np.atleast_2d(np.asarray(Pis, dtype=float))
    K = Pis.shape[0]
    hPi = h * Pis
    J = inertia.j_diag
    q = np.tile(_IDENTITY_QUAT, (K, 1)) if q_init is None else np.array(q_init, dtype=float)
    iters = np.zeros(K, dtype=int)

    g = _g_residual(q, hPi, J)
    res = np.max(np.abs(g), axis=1)
    sweeps = 0
    while True:
        pending = res > IMPLICIT_TOL
        if not np.any(pending):
            break
        if sweeps >= IMPLICIT_MAX_ITER:
            worst = int(np.argmax(res))
            raise NewtonDiverged(
                f"implicit solve residual {res[worst]:.3e} after {IMPLICIT_MAX_ITER} "
                f"iterations at batch node {worst} (Pi = {Pis[worst].tolist()}, h = {h})"
            )
        sweeps += 1
        idx = np.nonzero(pending)[0]
        Jg = _g_jacobian(q[idx], J)
        try:
            dq = np.linalg.solve(Jg, -g[idx][..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularNewtonStep(
                f"singular 4x4 Jacobian among batch nodes {idx.tolist()}"
            ) from exc
        q[idx] += dq
        iters[idx] += 1
        g[idx] = _g_residual(q[idx], hPi[idx], J)
        res[idx] = np.max(np.abs(g[idx]), axis=1)
        if not np.all(np.isfinite(res[idx])):
            raise NewtonDiverged("non-finite residual in implicit quaternion solve")

    # one polishing sweep: quadratic convergence takes an accepted residual
    # (<= 1e-12) to the arithmetic floor, which keeps long propagations
    # conservative to ~1e-13 instead of accumulating 1e-12-level solve noise.
    # Kept per node only when it actually improves.
    try:
        Jg = _g_jacobian(q, J)
        dq = np.linalg.solve(Jg, -g[..., None])[..., 0]
        q_pol = q + dq
        g_pol = _g_residual(q_pol, hPi, J)
        res_pol = np.max(np.abs(g_pol), axis=1)
        better = res_pol < res
        q[better] = q_pol[better]
        res[better] = res_pol[better]
    except np.linalg.LinAlgError:
        pass

    flip = q[:, 0] < 0.0
    q[flip] = -q[flip]
    return q, iters, res


def solve_relative_rotation(
    Pi: np.ndarray,
    h: float,
    inertia: InertiaModel,
    q_init: np.ndarray | None = None,
) -> RelativeRotationSolution:
    """Relative rotation F with hat(h Pi) = F Jd - Jd F^T, via Newton on q.

    The default initial guess is the identity quaternion; pass the previous
    step's q to warm-start along a trajectory (the per-step rotations are
    small at sane step lengths, so either converges in a few iterations).
    """
    if h <= 0.0:
        raise ValidationError("h", f"step length must be positive, got {h}")
    init = None if q_init is None else np.atleast_2d(np.asarray(q_init, dtype=float))
    q, iters, res = solve_quaternions_batch(np.atleast_2d(Pi), h, inertia, init)
    return RelativeRotationSolution(
        F=quat_to_rotation_unchecked(q[0]),
        q=q[0],
        newton_iters=int(iters[0]),
        residual_norm=float(res[0]),
    )


def quaternion_sensitivity(
    sol: RelativeRotationSolution, h: float, inertia: InertiaModel
) -> np.ndarray:
    """Exact momentum sensitivity dq/dPi, shape (4, 3).

    Solves (dg/dq) (dq/dPi) = [[h,0,0],[0,h,0],[0,0,h],[0,0,0]], the
    derivative of the implicit system with respect to Pi.
    """
    Jg = _g_jacobian(sol.q[None, :], inertia.j_diag)[0]
    rhs = np.zeros((4, 3))
    rhs[0, 0] = rhs[1, 1] = rhs[2, 2] = h
    try:
        return np.linalg.solve(Jg, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularNewtonStep("dg/dq singular at converged quaternion") from exc


def _dF_dq(q: np.ndarray) -> np.ndarray:
    """Batched partials of the rotation matrix w.r.t. each quaternion
    component, shape (K, 4, 3, 3)."""
    q0, q1, q2, q3 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    entries = [
        [[q0, -q3, q2], [q3, q0, -q1], [-q2, q1, q0]],
        [[q1, q2, q3], [q2, -q1, -q0], [q3, q0, -q1]],
        [[-q2, q1, q0], [q1, q2, q3], [-q0, q3, -q2]],
        [[-q3, -q0, q1], [q0, -q3, q2], [q1, q2, q3]],
    ]
    out = np.empty((q.shape[0], 4, 3, 3))
    for n in range(4):
        for a in range(3):
            for b in range(3):
                out[:, n, a, b] = 2.0 * entries[n][a][b]
    return out


def rotation_sensitivity(
    sol: RelativeRotationSolution, dq_dPi: np.ndarray
) -> np.ndarray:
    """Momentum sensitivities dF/dPi^i via the chain rule, shape (3, 3, 3).

    Element [i] is the 3x3 matrix sum_n (dF/dq_n) (dq_n/dPi^i).
    """
    dFdq = _dF_dq(sol.q[None, :])[0]               # (4, 3, 3)
    return np.einsum("nab,ni->iab", dFdq, dq_dPi)


def rotation_sensitivity_batch(q: np.ndarray, dq_dPi: np.ndarray) -> np.ndarray:
    """Batched rotation_sensitivity: (K,4), (K,4,3) -> (K,3,3,3)."""
    return np.einsum("knab,kni->kiab", _dF_dq(q), dq_dPi)


def step_forward(
    state: DynamicsState,
    u: np.ndarray,
    h: float,
    inertia: InertiaModel,
    q_init: np.ndarray | None = None,
) -> DynamicsState:
    """One step of the discrete dynamics: R' = R F, Pi' = F^T Pi + h u."""
    sol = solve_relative_rotation(state.Pi, h, inertia, q_init=q_init)
    return DynamicsState(
        R=state.R @ sol.F,
        Pi=sol.F.T @ state.Pi + h * np.asarray(u, dtype=float),
    )


def propagate(
    R0: np.ndarray,
    Pi0: np.ndarray,
    controls: np.ndarray,
    h: float,
    inertia: InertiaModel,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Propagate N steps from (R0, Pi0) under the given torque rows.

    Warm-starts each implicit solve from the previous step's quaternion.

    Returns:
        (Rs, Pis, qs): shapes (N+1, 3, 3), (N+1, 3), (N, 4); qs[k] is the
        relative-rotation quaternion of step k.
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    N = controls.shape[0]
    Rs = np.empty((N + 1, 3, 3))
    Pis = np.empty((N + 1, 3))
    qs = np.empty((N, 4))
    Rs[0] = R0
    Pis[0] = Pi0
    q_prev = None
    for k in range(N):
        sol = solve_relative_rotation(Pis[k], h, inertia, q_init=q_prev)
        qs[k] = sol.q
        Rs[k + 1] = Rs[k] @ sol.F
        Pis[k + 1] = sol.F.T @ Pis[k] + h * controls[k]
        q_prev = sol.q
    return Rs, Pis, qs


def trace_operator(F: np.ndarray, inertia: InertiaModel) -> np.ndarray:
    """The matrix trace(F Jd) I - F Jd whose invertibility underwrites the
    momentum sensitivities. At F = I it equals the full inertia matrix J."""
    FJd = F * inertia.jd_diag          # F @ diag(jd)
    return np.trace(FJd) * np.eye(3) - FJd


def sensitivity_matrices(
    F: np.ndarray, inertia: InertiaModel, h: float
) -> tuple[np.ndarray, np.ndarray]:
    """Momentum-variation matrices (B, N) of the relative rotation.

    B maps momentum variations into the body-frame tangent of F:
    xi = B dPi with B = h F^T (trace(F Jd) I - F Jd)^{-1}. N = B^T / h
    exactly. At F = I both reduce to multiples of J^{-1}.

    Raises:
        SingularTraceOperator: condition number above TRACE_OPERATOR_COND_LIMIT.
    """
    M = trace_operator(F, inertia)
    if np.linalg.cond(M) > TRACE_OPERATOR_COND_LIMIT:
        raise SingularTraceOperator(
            f"cond(trace operator) = {np.linalg.cond(M):.3e}"
        )
    N = np.linalg.solve(M.T, F)
    return h * N.T, N


def trace_operator_cos_threshold(inertia: InertiaModel) -> float:
    """Half-angle cosine threshold of the small-rotation invertibility test.

    With the Jd diagonal sorted ascending as d1 <= d2 <= d3 this equals
    sqrt((2 d3 + d2 - d1) / (2 (d3 + d2))).
    """
    d1, d2, d3 = np.sort(inertia.jd_diag)
    return float(np.sqrt((2.0 * d3 + d2 - d1) / (2.0 * (d3 + d2))))


def trace_operator_small_angle_condition(xi: np.ndarray, inertia: InertiaModel) -> bool:
    """Sufficient (not necessary) invertibility test for the trace operator
    at F = exp(hat(xi)): true iff

        cos(|xi| / 2) > trace_operator_cos_threshold(inertia),

    i.e. iff the rotation angle is below 2 arccos(threshold). Within that
    ball a Neumann-series bound keeps trace(F Jd) I - F Jd invertible; at
    xi = 0 the operator equals the full inertia matrix J. Outside the ball
    invertibility can fail outright: a quarter turn about a principal axis
    makes the operator annihilate that axis exactly. Runtime code therefore
    decides invertibility by condition number and uses this test as a
    diagnostic only.
    """
    return bool(
        np.cos(np.linalg.norm(xi) / 2.0) > trace_operator_cos_threshold(inertia)
    )
