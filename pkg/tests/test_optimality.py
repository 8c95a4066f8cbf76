from __future__ import annotations

import numpy as np
import pytest

from slewkit import (
    Bounds,
    DivisionByZeroMomentum,
    ValidationError,
    compute_slack_beta,
    control_generalized_gradient,
    exp_rodrigues,
    hat,
    momentum_boundary_residual,
    optimal_control,
    orientation_constraint,
    orientation_constraint_gradient,
    orientation_log_correction,
    quaternion_sensitivity,
    rotation_sensitivity,
    sensitivity_matrices,
    sigma_residual,
    solve_relative_rotation,
    step_forward,
    xi_residual,
)
from slewkit.dynamics import DynamicsState

from .conftest import random_axis, random_rotation


class TestBounds:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            Bounds(c=np.array([1.0, 0.0, 1.0]), b=np.ones(3))

    def test_rejects_bad_shape(self):
        with pytest.raises(ValidationError):
            Bounds(c=np.ones(4), b=np.ones(3))


class TestClampLaw:
    def test_zero_costate(self, bounds_ref):
        assert np.array_equal(optimal_control(np.zeros(3), bounds_ref), np.zeros(3))

    def test_componentwise_clamp(self, bounds_ref):
        u = optimal_control(np.array([0.5, -30.0, 10.0]), bounds_ref)
        assert np.array_equal(u, [-0.5, 20.0, -10.0])

    def test_saturation_exact(self, bounds_ref):
        u = optimal_control(np.array([25.0, 0.0, 0.0]), bounds_ref)
        assert np.array_equal(u, [-20.0, 0.0, 0.0])

    def test_kkt_case_split(self, bounds_ref, rng):
        # exactly one of {interior with u = -lam} or {saturated with
        # |lam| >= c} holds per component
        for _ in range(200):
            lam = rng.uniform(-60.0, 60.0, 3)
            u = optimal_control(lam, bounds_ref)
            for i in range(3):
                interior = abs(u[i]) < bounds_ref.c[i] and u[i] == -lam[i]
                saturated = (
                    abs(u[i]) == bounds_ref.c[i] and abs(lam[i]) >= bounds_ref.c[i]
                )
                assert interior != saturated

    def test_generalized_gradient_cases(self, bounds_ref):
        D = control_generalized_gradient(np.array([0.5, -30.0, 10.0]), bounds_ref)
        assert np.array_equal(np.diag(D), [-1.0, 0.0, -1.0])
        assert np.array_equal(
            np.diag(control_generalized_gradient(np.zeros(3), bounds_ref)),
            [-1.0, -1.0, -1.0],
        )

    def test_generalized_gradient_boundary_takes_minus_one(self, bounds_ref):
        D = control_generalized_gradient(np.array([20.0, -20.0, 5.0]), bounds_ref)
        assert np.array_equal(np.diag(D), [-1.0, -1.0, -1.0])


class TestSigmaResidual:
    def test_consistent_step_vanishes(self, inertia_ref, bounds_ref, rng):
        for _ in range(20):
            Pi = rng.uniform(-40.0, 40.0, 3)
            lam = rng.uniform(-30.0, 30.0, 3)
            u = optimal_control(lam, bounds_ref)
            nxt = step_forward(DynamicsState(R=np.eye(3), Pi=Pi), u, 0.1, inertia_ref)
            r = sigma_residual(Pi, nxt.Pi, lam, 0.1, inertia_ref, bounds_ref)
            assert np.max(np.abs(r)) < 1e-12

    def test_zero_case(self, inertia_ref, bounds_ref):
        r = sigma_residual(np.zeros(3), np.zeros(3), np.zeros(3), 0.1, inertia_ref, bounds_ref)
        assert np.array_equal(r, np.zeros(3))

    def test_linear_in_next_momentum(self, inertia_ref, bounds_ref, rng):
        Pi = rng.uniform(-40.0, 40.0, 3)
        lam = rng.uniform(-30.0, 30.0, 3)
        Pi1 = rng.uniform(-40.0, 40.0, 3)
        delta = rng.normal(size=3)
        r0 = sigma_residual(Pi, Pi1, lam, 0.1, inertia_ref, bounds_ref)
        r1 = sigma_residual(Pi, Pi1 + delta, lam, 0.1, inertia_ref, bounds_ref)
        assert np.allclose(r1 - r0, delta, atol=1e-14)


class TestXiResidual:
    def test_all_zero(self, inertia_ref):
        r = xi_residual(
            np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), np.eye(3),
            np.zeros(3), 0.1, inertia_ref,
        )
        assert np.array_equal(r, np.zeros(3))

    def test_bracket_is_identity_at_rest(self, inertia_ref, rng):
        lam_k = rng.normal(size=3)
        lam_k1 = rng.normal(size=3)
        r = xi_residual(
            np.zeros(3), lam_k, lam_k1, np.zeros(3), np.eye(3), np.zeros(3),
            0.1, inertia_ref,
        )
        assert np.allclose(r, lam_k1 - lam_k, atol=1e-14)

    def test_against_symbolic_oracle(self, inertia_ref, rng):
        # independent term-by-term evaluation with sympy rationals
        import sympy as sp

        h = 0.1
        for _ in range(3):
            Pi = rng.uniform(-40.0, 40.0, 3)
            lam_k = rng.uniform(-30.0, 30.0, 3)
            lam_k1 = rng.uniform(-30.0, 30.0, 3)
            mu0 = rng.uniform(-200.0, 200.0, 3)
            Q = random_rotation(rng)
            beta = rng.uniform(0.0, 2.0, 3)

            sol = solve_relative_rotation(Pi, h, inertia_ref)
            F = sp.Matrix(sol.F.tolist())
            Jd = sp.Matrix(inertia_ref.Jd.tolist())
            M = (F * Jd).trace() * sp.eye(3) - F * Jd
            N = M.T.inv() * F
            FtPi = F.T * sp.Matrix(Pi.tolist())
            hatFtPi = sp.Matrix([
                [0, -FtPi[2], FtPi[1]],
                [FtPi[2], 0, -FtPi[0]],
                [-FtPi[1], FtPi[0], 0],
            ])
            bracket = F - h * N * hatFtPi
            expected = (
                h * sp.Matrix((beta * Pi).tolist())
                - sp.Matrix(lam_k.tolist())
                + bracket * sp.Matrix(lam_k1.tolist())
                + N * sp.Matrix(Q.tolist()).T * sp.Matrix(mu0.tolist())
            )
            got = xi_residual(Pi, lam_k, lam_k1, mu0, Q, beta, h, inertia_ref)
            expected_np = np.array([float(expected[i]) for i in range(3)])
            assert np.max(np.abs(got - expected_np)) < 1e-12


class TestReductionAgainstUnreducedSystem:
    def test_unreduced_costate_rows_map_to_xi(self, inertia_ref, rng):
        # The full first-order system carries one multiplier per rotation
        # kinematics row and one per momentum row. Transporting the rotation
        # multiplier as mu_bar_k = (h^2/2) (trace(F)I - F^T) mu_k and scaling
        # lam_bar = h lam collapses it to the reduced residual evaluated here.
        h = 0.1
        for _ in range(10):
            Pi = rng.uniform(-40.0, 40.0, 3)
            lam_k = rng.uniform(-30.0, 30.0, 3)
            lam_k1 = rng.uniform(-30.0, 30.0, 3)
            mu_bar0 = rng.uniform(-200.0, 200.0, 3)
            Qprev = random_rotation(rng)

            sol = solve_relative_rotation(Pi, h, inertia_ref)
            F = sol.F
            Q = Qprev @ F
            mu_bar = Q.T @ mu_bar0

            T = np.trace(F) * np.eye(3) - F.T
            mu = (2.0 / h**2) * np.linalg.solve(T, mu_bar)

            B, N = sensitivity_matrices(F, inertia_ref, h)
            unreduced = (
                -lam_k / h
                + (F - B.T @ hat(F.T @ Pi)) @ (lam_k1 / h)
                + 0.5 * B.T @ T @ mu
            )
            reduced = xi_residual(
                Pi, lam_k, lam_k1, mu_bar0, Q, np.zeros(3), h, inertia_ref
            )
            assert np.max(np.abs(h * unreduced - reduced)) < 1e-10

    def test_rotation_multiplier_transport(self, inertia_ref, rng):
        # T_{k-1} mu_{k-1} = F_k T_k mu_k holds exactly under the transported
        # scaled variable
        h = 0.1
        Pi = rng.uniform(-40.0, 40.0, 3)
        F = solve_relative_rotation(Pi, h, inertia_ref).F
        mu_bar0 = rng.uniform(-100.0, 100.0, 3)
        mu_bar1 = F.T @ mu_bar0
        assert np.allclose(mu_bar0, F @ mu_bar1, atol=1e-12)


class TestBoundaryResidual:
    def test_matched(self):
        r = momentum_boundary_residual(np.ones(3), 2 * np.ones(3), np.ones(3), 2 * np.ones(3))
        assert np.array_equal(r, np.zeros(6))

    def test_block_order(self):
        r = momentum_boundary_residual(
            np.zeros(3), np.array([1.0, 0, 0]), np.zeros(3), np.zeros(3)
        )
        assert np.array_equal(r, [1.0, 0, 0, 0, 0, 0])

    def test_reference_targets(self):
        Pi_i = np.array([30.0, -10.0, 10.0])
        Pi_f = np.zeros(3)
        r = momentum_boundary_residual(Pi_i, Pi_f, Pi_i, Pi_f)
        assert np.array_equal(r, np.zeros(6))


class TestOrientationConstraint:
    def test_closed_loop_is_zero(self):
        R = random_rotation(np.random.default_rng(3))
        assert np.array_equal(orientation_constraint(R, R, [np.eye(3)] * 4), np.zeros(3))

    def test_exact_closure(self, rng):
        R_i = random_rotation(rng)
        xi = random_axis(rng) * 0.7
        F0 = exp_rodrigues(xi)
        R_f = R_i @ F0
        C = orientation_constraint(R_i, R_f, [F0, np.eye(3), np.eye(3)])
        assert np.max(np.abs(C)) < 1e-12

    def test_first_order_sensitivity_scale(self, rng):
        # ||C|| tracks ||delta|| to first order; the residual mismatch is the
        # O(||xi|| ||delta||) curvature of the log-composition
        R_i = random_rotation(rng)
        xi = random_axis(rng) * 0.5
        R_f = R_i @ exp_rodrigues(xi)
        for _ in range(10):
            delta = rng.normal(size=3) * 1e-6
            C = orientation_constraint(R_i, R_f, [exp_rodrigues(xi + delta)])
            norm_d = np.linalg.norm(delta)
            assert abs(np.linalg.norm(C) - norm_d) < 0.02 * norm_d

    def test_invariance_under_common_left_rotation(self, rng):
        # only R_f^T R_i enters, so a common left rotation cancels (to
        # roundoff: G^T G = I only at machine precision)
        R_i = random_rotation(rng)
        R_f = random_rotation(rng)
        Fs = [exp_rodrigues(random_axis(rng) * 0.1) for _ in range(5)]
        G = random_rotation(rng)
        C1 = orientation_constraint(R_i, R_f, Fs)
        C2 = orientation_constraint(G @ R_i, G @ R_f, Fs)
        assert np.allclose(C1, C2, atol=1e-13)


class TestOrientationGradient:
    def dF_of(self, Pi, h, inertia):
        sol = solve_relative_rotation(Pi, h, inertia)
        return sol, rotation_sensitivity(sol, quaternion_sensitivity(sol, h, inertia))

    def test_matches_fd_on_constraint_surface(self, inertia_ref, rng):
        # Pick boundary rotations that close the chain so the body-frame
        # formula is the exact derivative.
        h, n = 0.1, 4
        Pis = rng.uniform(-30.0, 30.0, (n, 3))
        sols = [self.dF_of(Pis[k], h, inertia_ref) for k in range(n)]
        Fs = [s.F for s, _ in sols]
        R_i = random_rotation(rng)
        R_f = R_i.copy()
        for F in Fs:
            R_f = R_f @ F
        eps = 1e-5
        for k in range(n):
            G = orientation_constraint_gradient(k, Fs, sols[k][1])
            for i in range(3):
                e = np.zeros(3)
                e[i] = eps
                Fp = solve_relative_rotation(Pis[k] + e, h, inertia_ref).F
                Fm = solve_relative_rotation(Pis[k] - e, h, inertia_ref).F
                cp = orientation_constraint(R_i, R_f, Fs[:k] + [Fp] + Fs[k + 1:])
                cm = orientation_constraint(R_i, R_f, Fs[:k] + [Fm] + Fs[k + 1:])
                fd = (cp - cm) / (2 * eps)
                denom = max(np.max(np.abs(fd)), 1e-6)
                assert np.max(np.abs(G[:, i] - fd)) / denom < 1e-5

    def test_log_correction_makes_gradient_exact_off_surface(self, inertia_ref, rng):
        h, n = 0.1, 4
        Pis = rng.uniform(-30.0, 30.0, (n, 3))
        sols = [self.dF_of(Pis[k], h, inertia_ref) for k in range(n)]
        Fs = [s.F for s, _ in sols]
        R_i = random_rotation(rng, max_angle=1.0)
        R_f = random_rotation(rng, max_angle=1.0)
        C = orientation_constraint(R_i, R_f, Fs)
        D = orientation_log_correction(C)
        eps = 1e-5
        for k in range(n):
            G = D @ orientation_constraint_gradient(k, Fs, sols[k][1])
            for i in range(3):
                e = np.zeros(3)
                e[i] = eps
                Fp = solve_relative_rotation(Pis[k] + e, h, inertia_ref).F
                Fm = solve_relative_rotation(Pis[k] - e, h, inertia_ref).F
                cp = orientation_constraint(R_i, R_f, Fs[:k] + [Fp] + Fs[k + 1:])
                cm = orientation_constraint(R_i, R_f, Fs[:k] + [Fm] + Fs[k + 1:])
                fd = (cp - cm) / (2 * eps)
                denom = max(np.max(np.abs(fd)), 1e-6)
                assert np.max(np.abs(G[:, i] - fd)) / denom < 1e-5

    def test_last_step_column_form(self, inertia_ref, rng):
        # with every other step at identity the trailing product is empty
        h = 0.1
        Pi = rng.uniform(-30.0, 30.0, 3)
        sol, dF = self.dF_of(Pi, h, inertia_ref)
        Fs = [np.eye(3), np.eye(3), sol.F]
        G = orientation_constraint_gradient(2, Fs, dF)
        from slewkit.optimality import vee_skew

        for i in range(3):
            assert np.allclose(G[:, i], vee_skew(sol.F.T @ dF[i]), atol=1e-15)

    def test_small_momentum_gradient_magnitude(self, inertia_ref):
        # at rest the gradient approaches h J^{-1} rotated by the trailing
        # product
        h = 0.1
        sol, dF = self.dF_of(np.zeros(3), h, inertia_ref)
        trailing = random_rotation(np.random.default_rng(5))
        Fs = [sol.F, trailing]
        G = orientation_constraint_gradient(0, Fs, dF)
        expected = trailing.T @ (h * np.diag(1.0 / inertia_ref.j_diag))
        assert np.max(np.abs(G - expected)) < 1e-10


class TestSlackRecovery:
    def test_substitute_back_zeroes_row(self, inertia_ref, rng):
        h = 0.1
        for _ in range(20):
            Pi = rng.uniform(1.0, 40.0, 3) * rng.choice([-1.0, 1.0], 3)
            lam_km1 = rng.uniform(-30.0, 30.0, 3)
            lam_k = rng.uniform(-30.0, 30.0, 3)
            mu0 = rng.uniform(-200.0, 200.0, 3)
            Q = random_rotation(rng)
            beta = compute_slack_beta(Pi, lam_km1, lam_k, mu0, Q, h, inertia_ref)
            r = xi_residual(Pi, lam_km1, lam_k, mu0, Q, beta, h, inertia_ref)
            assert np.max(np.abs(r)) < 1e-10

    def test_zero_component_rejected(self, inertia_ref):
        with pytest.raises(DivisionByZeroMomentum):
            compute_slack_beta(
                np.array([70.0, 0.0, 10.0]), np.zeros(3), np.zeros(3), np.zeros(3),
                np.eye(3), 0.1, inertia_ref,
            )

    def test_consistent_unconstrained_row_gives_zero_beta(self, inertia_ref, rng):
        # if the costate row already balances, the recovered multiplier is 0
        h = 0.1
        Pi = rng.uniform(1.0, 40.0, 3)
        lam_k = rng.uniform(-30.0, 30.0, 3)
        mu0 = rng.uniform(-100.0, 100.0, 3)
        Q = random_rotation(rng)
        lam_km1 = xi_residual(
            Pi, np.zeros(3), lam_k, mu0, Q, np.zeros(3), h, inertia_ref
        )
        beta = compute_slack_beta(Pi, lam_km1, lam_k, mu0, Q, h, inertia_ref)
        assert np.max(np.abs(beta)) < 1e-12
