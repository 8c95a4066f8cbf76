"""Multiple-shooting Newton solver for the constrained slew boundary-value
problem.

Unknowns are stacked per time node as

    X = (Pi_0, lam_0, Pi_1, lam_1, ..., Pi_N, lam_N, mu0)  in R^{6N+9}

and the matching conditions stack as

    M(X) = (Sigma_1, Xi_1, ..., Sigma_N, Xi_N, C_mtm, C_ornt).

Two loops are provided. `newton_solve` is plain root finding: full Newton
steps on M(X) = 0 with a pivoted dense factorization of the analytic block
Jacobian. `modified_shooting_solve` wraps each iteration with the
state-constraint machinery: clamp the momenta into the feasible box, re-sync
the costates touched by the clamp, recover the bound multipliers beta to
identify active constraints, and replace the costate rows of active entries
by bound equations |Pi_k^i| - b_i. The system size never changes; an active
constraint swaps a row, it does not add one. When no bound ever activates the
modified loop reproduces plain Newton exactly, iterate for iterate.

The Jacobian is analytic everywhere, including the exact momentum coupling of
the accumulated rotation products and the inverse-right-Jacobian prefactor of
the orientation rows, so it matches central finite differences away from the
clamp-law kinks. The clamp law itself contributes its generalized gradient
(-1 on unsaturated components, 0 on saturated ones).

Assembly is sequential and writes to fixed locations, so results are
bit-for-bit reproducible; independent per-node quantities could be farmed out
concurrently by a caller without changing any output.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dynamics import (
    InertiaModel,
    TRACE_OPERATOR_COND_LIMIT,
    _g_jacobian,
    rotation_sensitivity_batch,
    solve_quaternions_batch,
)
from .errors import (
    ActiveSetCycling,
    DynamicsFailure,
    MaxIterationsExceeded,
    NewtonDiverged,
    SingularJacobian,
    SingularNewtonStep,
    SingularTraceOperator,
    ValidationError,
)
from .optimality import Bounds, optimal_control
from .so3 import log_map, require_rotation, right_jacobian_inverse, rotation_angle

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200

# Abort if the active set alternates between two sets this many times in a row.
CYCLE_GUARD = 10

_I3 = np.eye(3)


@dataclass(frozen=True)
class ManeuverProblem:
    """Boundary data and discretization of one slew.

    N is the number of steps (N+1 momentum nodes), h the step length in
    seconds. Orientations are world-from-body rotation matrices.
    """

    inertia: InertiaModel
    bounds: Bounds
    R_i: np.ndarray
    R_f: np.ndarray
    Pi_i: np.ndarray
    Pi_f: np.ndarray
    h: float
    N: int

    def __post_init__(self):
        object.__setattr__(self, "R_i", require_rotation(self.R_i, "R_i"))
        object.__setattr__(self, "R_f", require_rotation(self.R_f, "R_f"))
        if self.h <= 0.0:
            raise ValidationError("h", f"step length must be positive, got {self.h}")
        if self.N < 1:
            raise ValidationError("N", f"need at least one step, got {self.N}")
        object.__setattr__(self, "Pi_i", np.asarray(self.Pi_i, dtype=float))
        object.__setattr__(self, "Pi_f", np.asarray(self.Pi_f, dtype=float))

    @property
    def size(self) -> int:
        return 6 * self.N + 9


class ShootingVector:
    """Flat stacked unknowns with named views.

    momenta and costates are (N+1, 3) writable views into the flat array;
    mu_bar0 is the trailing length-3 view.
    """

    def __init__(self, x: np.ndarray, N: int):
        x = np.asarray(x, dtype=float)
        if x.shape != (6 * N + 9,):
            raise ValidationError("X", f"expected length {6 * N + 9}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("X", "entries must be finite")
        self.x = x
        self.N = N

    @classmethod
    def zeros(cls, N: int) -> "ShootingVector":
        return cls(np.zeros(6 * N + 9), N)

    @property
    def momenta(self) -> np.ndarray:
        return self.x[: 6 * (self.N + 1)].reshape(self.N + 1, 2, 3)[:, 0, :]

    @property
    def costates(self) -> np.ndarray:
        return self.x[: 6 * (self.N + 1)].reshape(self.N + 1, 2, 3)[:, 1, :]

    @property
    def mu_bar0(self) -> np.ndarray:
        return self.x[6 * (self.N + 1):]

    def copy(self) -> "ShootingVector":
        return ShootingVector(self.x.copy(), self.N)


@dataclass
class ActiveSet:
    """Per-(node, axis) bound status.

    flags[k, i] is 0 (inactive), +1 (upper bound Pi = +b) or -1 (lower bound
    Pi = -b); beta[k, i] holds the recovered multiplier for active entries
    and 0 elsewhere.
    """

    flags: np.ndarray
    beta: np.ndarray

    @classmethod
    def empty(cls, N: int) -> "ActiveSet":
        return cls(np.zeros((N + 1, 3), dtype=np.int8), np.zeros((N + 1, 3)))

    def entries(self) -> list[tuple[int, int, int]]:
        ks, iz = np.nonzero(self.flags)
        return [(int(k), int(i), int(self.flags[k, i])) for k, i in zip(ks, iz)]

    def is_empty(self) -> bool:
        return not np.any(self.flags)

    def key(self) -> frozenset:
        return frozenset(self.entries())


@dataclass
class SolverReport:
    """Progress record of one solver run."""

    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    active_set_history: list[list[tuple[int, int, int]]] = field(default_factory=list)
    converged: bool = False
    final_residual_inf: float = float("inf")
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual_inf": self.final_residual_inf,
            "residual_history": list(self.residual_history),
            "active_set_history": [
                [list(e) for e in entries] for entries in self.active_set_history
            ],
            "wall_time_s": self.wall_time,
        }


# ---------------------------------------------------------------------------
# per-iterate cache of momentum-dependent quantities
# ---------------------------------------------------------------------------


class _Trajectory:
    """Everything determined by the momenta alone, computed once per iterate.

    Nodes k = 0..N. P[k] = F_1 F_2 ... F_k is the costate transport product
    (P[0] = I); A[j] = F_{j+1} ... F_{N-1} is the trailing orientation
    product (A[N-1] = I).
    """

    def __init__(
        self,
        Pis: np.ndarray,
        problem: "ManeuverProblem | _DynOnly",
        with_orientation: bool = True,
    ):
        h, inertia = problem.h, problem.inertia
        K = Pis.shape[0]
        try:
            q, _, _ = solve_quaternions_batch(Pis, h, inertia)
        except (NewtonDiverged, SingularNewtonStep) as exc:
            raise DynamicsFailure(_failed_node(Pis, h, inertia), exc) from exc

        self.q = q
        q0, q1, q2, q3 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
        F = np.empty((K, 3, 3))
        F[:, 0, 0] = q0*q0 + q1*q1 - q2*q2 - q3*q3
        F[:, 0, 1] = 2*q1*q2 - 2*q0*q3
        F[:, 0, 2] = 2*q1*q3 + 2*q0*q2
        F[:, 1, 0] = 2*q1*q2 + 2*q0*q3
        F[:, 1, 1] = q0*q0 - q1*q1 + q2*q2 - q3*q3
        F[:, 1, 2] = 2*q2*q3 - 2*q0*q1
        F[:, 2, 0] = 2*q1*q3 - 2*q0*q2
        F[:, 2, 1] = 2*q2*q3 + 2*q0*q1
        F[:, 2, 2] = q0*q0 - q1*q1 - q2*q2 + q3*q3
        self.F = F

        # dq/dPi at every node: (dg/dq) dq = diag-padded(h)
        Jg = _g_jacobian(q, inertia.j_diag)
        rhs = np.zeros((4, 3))
        rhs[0, 0] = rhs[1, 1] = rhs[2, 2] = h
        try:
            dq = np.linalg.solve(Jg, np.broadcast_to(rhs, (K, 4, 3)))
        except np.linalg.LinAlgError as exc:
            raise DynamicsFailure(
                int(np.argmax(np.linalg.cond(Jg))), SingularNewtonStep(str(exc))
            ) from exc
        self.dF = rotation_sensitivity_batch(q, dq)           # (K, 3, 3, 3)

        jd = inertia.jd_diag
        FJd = F * jd                                           # F @ diag(jd)
        trFJd = np.einsum("kaa->k", FJd)
        self.M = trFJd[:, None, None] * _I3 - FJd
        conds = np.linalg.cond(self.M)
        if np.any(conds > TRACE_OPERATOR_COND_LIMIT):
            bad = int(np.argmax(conds))
            raise DynamicsFailure(
                bad,
                SingularTraceOperator(f"cond(trace operator) = {conds[bad]:.3e}"),
            )
        Mt = np.transpose(self.M, (0, 2, 1))
        self.Ntil = np.linalg.solve(Mt, F)                     # N_k = M^{-T} F

        self.FtPi = np.einsum("kba,kb->ka", F, Pis)            # F_k^T Pi_k
        hatFtPi = _hat_batch(self.FtPi)
        self.bracket = F - h * (self.Ntil @ hatFtPi)           # F - h N hat(F^T Pi)

        # dM/dPi^i and dN/dPi^i
        dFJd = self.dF * jd
        trdFJd = np.einsum("kiaa->ki", dFJd)
        dM = trdFJd[:, :, None, None] * _I3 - dFJd
        rhsN = self.dF - np.einsum("kiba,kbc->kiac", dM, self.Ntil)
        self.dN = np.linalg.solve(Mt[:, None, :, :], rhsN)     # (K, 3, 3, 3)

        # d(F^T Pi)/dPi^i = dF_i^T Pi + F^T e_i
        self.dFtPi = np.einsum("kiab,ka->kib", self.dF, Pis) + F

        # costate transport prefix products P_k = F_1 ... F_k
        P = np.empty((K, 3, 3))
        P[0] = _I3
        for k in range(1, K):
            P[k] = P[k - 1] @ F[k]
        self.P = P

        self.A = None
        self.ornt_product = None
        self.C_ornt = None
        if with_orientation:
            # trailing orientation products A_j = F_{j+1} ... F_{N-1}
            N = problem.N
            A = np.empty((N, 3, 3))
            A[N - 1] = _I3
            for j in range(N - 2, -1, -1):
                A[j] = F[j + 1] @ A[j + 1]
            self.A = A
            self.ornt_product = problem.R_f.T @ problem.R_i @ F[0] @ A[0]
            self.C_ornt = _log_map_checked(self.ornt_product)


def _failed_node(Pis: np.ndarray, h: float, inertia: InertiaModel) -> int:
    """Locate the first node whose implicit solve fails (slow path)."""
    for k in range(Pis.shape[0]):
        try:
            solve_quaternions_batch(Pis[k:k + 1], h, inertia)
        except (NewtonDiverged, SingularNewtonStep):
            return k
    return -1


def _log_map_checked(R: np.ndarray) -> np.ndarray:
    return log_map(R)


def _hat_batch(v: np.ndarray) -> np.ndarray:
    K = v.shape[0]
    H = np.zeros((K, 3, 3))
    H[:, 0, 1] = -v[:, 2]
    H[:, 0, 2] = v[:, 1]
    H[:, 1, 0] = v[:, 2]
    H[:, 1, 2] = -v[:, 0]
    H[:, 2, 0] = -v[:, 1]
    H[:, 2, 1] = v[:, 0]
    return H


# ---------------------------------------------------------------------------
# residual and Jacobian assembly
# ---------------------------------------------------------------------------


def _residual(
    X: ShootingVector,
    problem: ManeuverProblem,
    traj: _Trajectory,
    active: ActiveSet | None,
) -> np.ndarray:
    N, h = problem.N, problem.h
    Pi = X.momenta
    lam = X.costates
    mu0 = X.mu_bar0
    r = np.empty(problem.size)

    u = optimal_control(lam[:N], problem.bounds)               # (N, 3)
    sigma = Pi[1:] - traj.FtPi[:N] - h * u                     # Sigma_1..Sigma_N

    # Xi_k = -lam_{k-1} + bracket_k lam_k + N_k P_k^T mu0, k = 1..N
    transported = np.einsum("kba,b->ka", traj.P[1:], mu0)      # P_k^T mu0
    xi = (
        -lam[:N]
        + np.einsum("kab,kb->ka", traj.bracket[1:], lam[1:])
        + np.einsum("kab,kb->ka", traj.Ntil[1:], transported)
    )

    body = np.empty((N, 6))
    body[:, :3] = sigma
    body[:, 3:] = xi
    r[: 6 * N] = body.reshape(-1)
    r[6 * N: 6 * N + 3] = Pi[N] - problem.Pi_f
    r[6 * N + 3: 6 * N + 6] = Pi[0] - problem.Pi_i
    r[6 * N + 6:] = traj.C_ornt

    if active is not None and not active.is_empty():
        b = problem.bounds.b
        for k, i, _sign in active.entries():
            r[6 * (k - 1) + 3 + i] = abs(Pi[k, i]) - b[i]
    return r


def _jacobian(
    X: ShootingVector,
    problem: ManeuverProblem,
    traj: _Trajectory,
    active: ActiveSet | None,
) -> np.ndarray:
    N, h = problem.N, problem.h
    n = problem.size
    Pi = X.momenta
    lam = X.costates
    mu0 = X.mu_bar0
    J = np.zeros((n, n))
    mu_col = 6 * (N + 1)

    gg = np.where(np.abs(lam[:N]) <= problem.bounds.c, -1.0, 0.0)   # (N, 3)

    hatFtPi = _hat_batch(traj.FtPi)
    # Xi diagonal block pieces (all nodes; used for k = 1..N):
    #   E_k[:, i] = dN_i v1 + dF_i lam_k - h N_k (dFtPi_i x lam_k)
    #   with v1 = P_k^T mu0 - h hat(F^T Pi) lam_k
    v1 = np.einsum("kba,b->ka", traj.P, mu0) - h * np.einsum(
        "kab,kb->ka", hatFtPi, lam
    )
    term = np.einsum("kiab,kb->kia", traj.dN, v1)
    term += np.einsum("kiab,kb->kia", traj.dF, lam)
    cross = np.cross(traj.dFtPi, lam[:, None, :])
    term -= h * np.einsum("kab,kib->kia", traj.Ntil, cross)
    E = np.transpose(term, (0, 2, 1))                               # (K, 3, 3)

    # W_j[:, i] = P_j dF_{j,i}^T (P_{j-1}^T mu0), the Q-product coupling
    P_shift = np.concatenate([traj.P[:1], traj.P[:-1]], axis=0)
    tvec = np.einsum("kba,b->ka", P_shift, mu0)
    u_jib = np.einsum("kiab,ka->kib", traj.dF, tvec)
    W = np.transpose(np.einsum("kab,kib->kia", traj.P, u_jib), (0, 2, 1))

    G = np.einsum("kab,kcb->kac", traj.Ntil, traj.P)                # N_k P_k^T

    for k in range(1, N + 1):
        rs = 6 * (k - 1)
        rx = rs + 3
        cPi_prev = 6 * (k - 1)
        cLam_prev = cPi_prev + 3
        cPi_k = 6 * k
        cLam_k = cPi_k + 3

        # Sigma_k rows
        J[rs:rs + 3, cPi_k:cPi_k + 3] = _I3
        J[rs:rs + 3, cPi_prev:cPi_prev + 3] = -traj.bracket[k - 1].T
        J[rs + 0, cLam_prev + 0] = -h * gg[k - 1, 0]
        J[rs + 1, cLam_prev + 1] = -h * gg[k - 1, 1]
        J[rs + 2, cLam_prev + 2] = -h * gg[k - 1, 2]

        # Xi_k rows
        J[rx:rx + 3, cLam_prev:cLam_prev + 3] = -_I3
        J[rx:rx + 3, cLam_k:cLam_k + 3] += traj.bracket[k]
        J[rx:rx + 3, mu_col:mu_col + 3] = G[k]
        blocks = np.einsum("ab,jbc->ajc", G[k], W[1:k + 1])         # (3, k, 3)
        cols = (6 * np.arange(1, k + 1)[:, None] + np.arange(3)[None, :]).ravel()
        J[rx:rx + 3, cols] += blocks.reshape(3, -1)
        J[rx:rx + 3, cPi_k:cPi_k + 3] += E[k]

    # boundary rows
    J[6 * N: 6 * N + 3, 6 * N: 6 * N + 3] = _I3
    J[6 * N + 3: 6 * N + 6, 0:3] = _I3

    # orientation rows: exact derivative of the log-map defect
    ro = 6 * N + 6
    Dcorr = right_jacobian_inverse(traj.C_ornt)
    FtdF = np.einsum("kba,kibc->kiac", traj.F, traj.dF)
    s = np.empty((N, 3, 3))                                         # [j, i, :]
    s[:, :, 0] = (FtdF[:N, :, 2, 1] - FtdF[:N, :, 1, 2]) / 2.0
    s[:, :, 1] = (FtdF[:N, :, 0, 2] - FtdF[:N, :, 2, 0]) / 2.0
    s[:, :, 2] = (FtdF[:N, :, 1, 0] - FtdF[:N, :, 0, 1]) / 2.0
    for j in range(N):
        block = Dcorr @ traj.A[j].T @ s[j].T
        J[ro:ro + 3, 6 * j: 6 * j + 3] = block

    if active is not None and not active.is_empty():
        for k, i, sign in active.entries():
            row = 6 * (k - 1) + 3 + i
            J[row, :] = 0.0
            J[row, 6 * k + i] = float(sign)
    return J


def assemble_matching(X: ShootingVector, problem: ManeuverProblem) -> np.ndarray:
    """Stacked matching conditions M(X) with no bound active, length 6N+9."""
    traj = _Trajectory(X.momenta, problem)
    return _residual(X, problem, traj, None)


def assemble_jacobian(X: ShootingVector, problem: ManeuverProblem) -> np.ndarray:
    """Analytic Jacobian dM/dX, square of size 6N+9."""
    traj = _Trajectory(X.momenta, problem)
    return _jacobian(X, problem, traj, None)


def _solve_linear(J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Row-equilibrated pivoted LU solve with an explicit rank check.

    Residual rows mix scales (boundary rows are O(1), orientation rows carry
    h/J factors), so rows are normalized to unit max before factoring; the
    pivot-ratio test then flags genuine rank deficiency, not bad scaling.
    """
    scale = np.max(np.abs(J), axis=1)
    if np.any(scale == 0.0):
        raise SingularJacobian(f"zero row {int(np.argmax(scale == 0.0))} in Jacobian")
    Js = J / scale[:, None]
    with warnings.catch_warnings():
        # the pivot check below raises on rank deficiency; no need for chatter
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(Js, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.min() == 0.0 or d.min() < d.max() * 1e-14:
        raise SingularJacobian(
            f"pivot ratio {d.min() / max(d.max(), 1e-300):.3e} signals rank deficiency"
        )
    return scipy.linalg.lu_solve((lu, piv), rhs / scale, check_finite=False)


# ---------------------------------------------------------------------------
# constraint handling (projection, costate re-sync, active set)
# ---------------------------------------------------------------------------


def project_feasible(X: ShootingVector, bounds: Bounds) -> ShootingVector:
    """Clamp every momentum block into the box |Pi_k^i| <= b_i.

    Costates and mu0 are untouched; idempotent by construction.
    """
    out = X.copy()
    np.clip(out.momenta, -bounds.b, bounds.b, out=out.momenta)
    return out


def update_costates_after_projection(
    X_projected: ShootingVector,
    h: float,
    inertia: InertiaModel,
    bounds: Bounds,
    changed: np.ndarray | None = None,
    traj: _Trajectory | None = None,
) -> ShootingVector:
    """Re-sync costates with the control implied by the projected momenta.

    For each step k, the implied torque u = (Pi_k - F_{k-1}^T Pi_{k-1}) / h
    is computed; on components where it is strictly interior (|u_i| < c_i)
    the clamp law is invertible and lam_{k-1}^i is overwritten with -u_i.
    Saturated components keep their stored costate.

    `changed` is the per-(node, axis) mask of momenta the projection moved.
    Only components whose adjacent momenta were clipped are re-synced: the
    rewrite deliberately shifts the projection defect from the momentum rows
    into the costate rows that constraint enforcement is about to replace,
    and touching unclipped axes would corrupt their still-valid costates.
    A None mask re-syncs every component (standalone use); an all-false mask
    makes this a no-op, which keeps the modified loop identical to plain
    Newton while no bound ever activates.
    """
    out = X_projected.copy()
    N = out.N
    if traj is None:
        traj = _Trajectory(out.momenta, _DynOnly(h, inertia, N), with_orientation=False)
    if changed is None:
        changed = np.ones((N + 1, 3), dtype=bool)
    Pi = out.momenta
    lam = out.costates
    for k in range(1, N + 1):
        touched = changed[k - 1] | changed[k]
        if not np.any(touched):
            continue
        u = (Pi[k] - traj.FtPi[k - 1]) / h
        overwrite = touched & (np.abs(u) < bounds.c)
        lam[k - 1, overwrite] = -u[overwrite]
    return out


class _DynOnly:
    """Minimal problem stand-in so _Trajectory can be built outside a solve."""

    def __init__(self, h: float, inertia: InertiaModel, N: int):
        self.h = h
        self.inertia = inertia
        self.N = N
        self.R_f = _I3
        self.R_i = _I3


def identify_active_set(
    X_projected: ShootingVector,
    problem: ManeuverProblem,
    traj: _Trajectory | None = None,
) -> ActiveSet:
    """Mark bound contacts with positive recovered multipliers as active.

    A component (k, i), 1 <= k <= N-1, is active iff the projected momentum
    sits exactly on the bound and the multiplier beta_k^i recovered from the
    costate row is strictly positive; beta <= 0 releases the constraint.
    """
    N, h = problem.N, problem.h
    if traj is None:
        traj = _Trajectory(X_projected.momenta, problem)
    out = ActiveSet.empty(N)
    Pi = X_projected.momenta
    lam = X_projected.costates
    mu0 = X_projected.mu_bar0
    b = problem.bounds.b
    for k in range(1, N):
        on_bound = np.abs(Pi[k]) == b
        if not np.any(on_bound):
            continue
        xi0 = (
            -lam[k - 1]
            + traj.bracket[k] @ lam[k]
            + traj.Ntil[k] @ (traj.P[k].T @ mu0)
        )
        for i in range(3):
            if not on_bound[i]:
                continue
            beta_i = -xi0[i] / (h * Pi[k, i])   # Pi on the bound, nonzero
            if beta_i > 0.0:
                out.flags[k, i] = 1 if Pi[k, i] > 0 else -1
                out.beta[k, i] = beta_i
    return out


def enforce_active_constraints(
    active: ActiveSet,
    residual: np.ndarray,
    jacobian: np.ndarray,
    X: ShootingVector,
    bounds: Bounds,
) -> tuple[np.ndarray, np.ndarray]:
    """Swap the costate row of each active entry for |Pi_k^i| - b_i.

    Returns modified copies; all other rows are preserved bit-identically and
    the system dimension is unchanged.
    """
    r = residual.copy()
    J = jacobian.copy()
    Pi = X.momenta
    for k, i, sign in active.entries():
        row = 6 * (k - 1) + 3 + i
        r[row] = abs(Pi[k, i]) - bounds.b[i]
        J[row, :] = 0.0
        J[row, 6 * k + i] = float(sign)
    return r, J


# ---------------------------------------------------------------------------
# Newton loops
# ---------------------------------------------------------------------------


def _two_set_cycle(history: list[frozenset], window: int = CYCLE_GUARD) -> bool:
    """True when the last `window` entries strictly alternate between exactly
    two distinct sets (the livelock signature the solver refuses to ride)."""
    if len(history) < window:
        return False
    tail = history[-window:]
    if len(set(tail)) != 2:
        return False
    return all(tail[m] != tail[m + 1] for m in range(window - 1))


def default_initial_guess(problem: ManeuverProblem) -> ShootingVector:
    """Zero costates and mu0, momenta linearly interpolated Pi_i -> Pi_f."""
    X = ShootingVector.zeros(problem.N)
    alphas = np.linspace(0.0, 1.0, problem.N + 1)[:, None]
    X.momenta[:] = (1.0 - alphas) * problem.Pi_i + alphas * problem.Pi_f
    return X


def newton_solve(
    X0: ShootingVector,
    problem: ManeuverProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = 1.0,
) -> tuple[ShootingVector, SolverReport]:
    """Plain multiple-shooting Newton on M(X) = 0, ignoring momentum bounds.

    Full steps by default; `damping` scales the update for hard cases.
    Stops when ||M(X)||_inf < tol.

    Raises:
        MaxIterationsExceeded, SingularJacobian, DynamicsFailure.
    """
    X, _, report = _newton_loop(X0, problem, tol, max_iter, damping, constrained=False)
    return X, report


def modified_shooting_solve(
    X0: ShootingVector,
    problem: ManeuverProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = 1.0,
) -> tuple[ShootingVector, ActiveSet, SolverReport]:
    """Momentum-constrained shooting: project, re-sync costates, identify and
    enforce active bounds, then take a Newton step; repeat to tolerance.

    On success the returned vector is feasible, all non-replaced residuals
    meet tol, and every active entry sits on its bound with beta >= 0.

    Raises:
        MaxIterationsExceeded, SingularJacobian, DynamicsFailure,
        ActiveSetCycling.
    """
    return _newton_loop(X0, problem, tol, max_iter, damping, constrained=True)


def _newton_loop(
    X0: ShootingVector,
    problem: ManeuverProblem,
    tol: float,
    max_iter: int,
    damping: float,
    constrained: bool,
) -> tuple[ShootingVector, ActiveSet, SolverReport]:
    start = time.perf_counter()
    report = SolverReport()
    X = X0.copy()
    N = problem.N
    set_history: list[frozenset] = []

    for iteration in range(max_iter + 1):
        if constrained:
            Xt = project_feasible(X, problem.bounds)
            changed = Xt.momenta != X.momenta
            traj = _Trajectory(Xt.momenta, problem)
            if np.any(changed):
                Xt = update_costates_after_projection(
                    Xt, problem.h, problem.inertia, problem.bounds,
                    changed=changed, traj=traj,
                )
            active = identify_active_set(Xt, problem, traj=traj)
        else:
            Xt = X
            traj = _Trajectory(Xt.momenta, problem)
            active = ActiveSet.empty(N)

        r = _residual(Xt, problem, traj, active)
        res_inf = float(np.max(np.abs(r)))
        report.residual_history.append(res_inf)
        report.active_set_history.append(sorted(active.entries()))
        set_history.append(active.key())

        if res_inf < tol:
            report.converged = True
            report.final_residual_inf = res_inf
            report.iterations = iteration
            report.wall_time = time.perf_counter() - start
            return Xt, active, report

        if iteration == max_iter:
            break

        if _two_set_cycle(set_history):
            raise ActiveSetCycling(
                f"active set alternated between two sets for {CYCLE_GUARD} iterations"
            )

        J = _jacobian(Xt, problem, traj, active)
        dx = _solve_linear(J, -r)
        X = ShootingVector(Xt.x + damping * dx, N)

    report.converged = False
    report.final_residual_inf = report.residual_history[-1]
    report.iterations = max_iter
    report.wall_time = time.perf_counter() - start
    exc = MaxIterationsExceeded(max_iter, report.final_residual_inf)
    exc.report = report
    raise exc


# ---------------------------------------------------------------------------
# momentum-only system (no orientation row, no mu0): diagnostics
# ---------------------------------------------------------------------------


def momentum_only_residual(Y: np.ndarray, problem: ManeuverProblem) -> np.ndarray:
    """Matching conditions of the momentum-only problem, length 6(N+1).

    Y stacks (Pi_0, lam_0, ..., Pi_N, lam_N); rows are Sigma_k, the costate
    rows without the rotation-costate term, and the six boundary rows.
    """
    N, h = problem.N, problem.h
    Y = np.asarray(Y, dtype=float)
    nodes = Y.reshape(N + 1, 2, 3)
    Pi, lam = nodes[:, 0, :], nodes[:, 1, :]
    traj = _Trajectory(Pi, problem, with_orientation=False)
    u = optimal_control(lam[:N], problem.bounds)
    sigma = Pi[1:] - traj.FtPi[:N] - h * u
    xi = -lam[:N] + np.einsum("kab,kb->ka", traj.bracket[1:], lam[1:])
    body = np.empty((N, 6))
    body[:, :3] = sigma
    body[:, 3:] = xi
    return np.concatenate([body.reshape(-1), Pi[N] - problem.Pi_f, Pi[0] - problem.Pi_i])


def momentum_only_jacobian_diagnostic(
    Y: np.ndarray, problem: ManeuverProblem
) -> tuple[np.ndarray, float]:
    """Assemble the block-bidiagonal-plus-border Jacobian of the momentum-only
    system and report its condition number.

    Nonsingularity is guaranteed whenever at least one step has a fully
    unsaturated control; callers should treat the condition number as a
    diagnostic, not an assertion, outside that hypothesis.
    """
    N, h = problem.N, problem.h
    Y = np.asarray(Y, dtype=float)
    nodes = Y.reshape(N + 1, 2, 3)
    Pi, lam = nodes[:, 0, :], nodes[:, 1, :]
    traj = _Trajectory(Pi, problem, with_orientation=False)
    n = 6 * (N + 1)
    J = np.zeros((n, n))

    gg = np.where(np.abs(lam[:N]) <= problem.bounds.c, -1.0, 0.0)
    hatFtPi = _hat_batch(traj.FtPi)
    v1 = -h * np.einsum("kab,kb->ka", hatFtPi, lam)
    term = np.einsum("kiab,kb->kia", traj.dN, v1)
    term += np.einsum("kiab,kb->kia", traj.dF, lam)
    cross = np.cross(traj.dFtPi, lam[:, None, :])
    term -= h * np.einsum("kab,kib->kia", traj.Ntil, cross)
    E = np.transpose(term, (0, 2, 1))

    for k in range(1, N + 1):
        rs = 6 * (k - 1)
        rx = rs + 3
        cPi_prev = 6 * (k - 1)
        cLam_prev = cPi_prev + 3
        cPi_k = 6 * k
        cLam_k = cPi_k + 3
        J[rs:rs + 3, cPi_k:cPi_k + 3] = _I3
        J[rs:rs + 3, cPi_prev:cPi_prev + 3] = -traj.bracket[k - 1].T
        for i in range(3):
            J[rs + i, cLam_prev + i] = -h * gg[k - 1, i]
        J[rx:rx + 3, cLam_prev:cLam_prev + 3] = -_I3
        J[rx:rx + 3, cLam_k:cLam_k + 3] = traj.bracket[k]
        J[rx:rx + 3, cPi_k:cPi_k + 3] = E[k]

    J[6 * N: 6 * N + 3, 6 * N: 6 * N + 3] = _I3
    J[6 * N + 3: 6 * N + 6, 0:3] = _I3
    return J, float(np.linalg.cond(J))


def solve_momentum_only_staircase(
    J: np.ndarray, rhs: np.ndarray, N: int
) -> np.ndarray:
    """Solve the momentum-only block system by staircase elimination.

    Exploits the structure: block row k couples only node pairs (k-1, k),
    plus one boundary border row. Each node update is expressed affinely in
    the unknown at node 0; the border rows then close a single 6x6 system.
    Agrees with the dense pivoted solve to roundoff and runs in O(N) block
    operations.
    """
    blocks_J = []
    blocks_K = []
    for k in range(1, N + 1):
        rs = 6 * (k - 1)
        cprev = 6 * (k - 1)
        ck = 6 * k
        blocks_J.append(-J[rs:rs + 6, cprev:cprev + 6])
        blocks_K.append(J[rs:rs + 6, ck:ck + 6])
    Bi = J[6 * N:, 0:6]
    Bf = J[6 * N:, 6 * N: 6 * N + 6]

    alpha = np.zeros(6)
    Gamma = np.eye(6)
    for k in range(1, N + 1):
        rk = rhs[6 * (k - 1): 6 * k]
        Kk = blocks_K[k - 1]
        Jk = blocks_J[k - 1]
        alpha = np.linalg.solve(Kk, rk + Jk @ alpha)
        Gamma = np.linalg.solve(Kk, Jk @ Gamma)
    rB = rhs[6 * N:]
    lhs = Bi + Bf @ Gamma
    y0 = np.linalg.solve(lhs, rB - Bf @ alpha)

    out = np.empty(6 * (N + 1))
    out[0:6] = y0
    yk = y0
    alpha = np.zeros(6)
    Gamma = np.eye(6)
    for k in range(1, N + 1):
        rk = rhs[6 * (k - 1): 6 * k]
        Kk = blocks_K[k - 1]
        Jk = blocks_J[k - 1]
        yk = np.linalg.solve(Kk, rk + Jk @ yk)
        out[6 * k: 6 * k + 6] = yk
    return out


def terminal_orientation_error(
    X: ShootingVector, problem: ManeuverProblem
) -> float:
    """Angle of R_N^T R_f for the trajectory encoded by X, in radians."""
    traj = _Trajectory(X.momenta, problem)
    R_N = problem.R_i @ traj.F[0] @ traj.A[0]
    return rotation_angle(R_N.T @ problem.R_f)
