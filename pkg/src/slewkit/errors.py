"""Exception hierarchy for slewkit.

Numerical failures are signaled, never papered over: a singular factorization
or an orthogonality drift means the caller has a bug (or an infeasible
problem), so every error carries enough context to locate it.
"""

from __future__ import annotations


class SlewkitError(Exception):
    """Base class for all slewkit errors."""


class NotSkewSymmetric(SlewkitError):
    """Matrix handed to vee() is not skew-symmetric within tolerance."""


class NotNormalized(SlewkitError):
    """Quaternion norm differs from 1 beyond tolerance."""


class NotARotation(SlewkitError):
    """Matrix fails the orthogonality / positive-determinant check."""


class AngleNearPi(SlewkitError):
    """Rotation angle within guard band of pi; the log axis is ill-conditioned."""


class NewtonDiverged(SlewkitError):
    """Local Newton iteration failed to reach tolerance within the cap."""


class SingularNewtonStep(SlewkitError):
    """The 4x4 quaternion-system Jacobian is numerically singular."""


class SingularTraceOperator(SlewkitError):
    """trace(F Jd) I - F Jd is rank-deficient; momentum sensitivities undefined."""


class DivisionByZeroMomentum(SlewkitError):
    """Slack recovery requested at a zero momentum component."""


class DynamicsFailure(SlewkitError):
    """A per-step dynamics solve failed inside a stacked evaluation.

    Attributes:
        step: time index k of the offending node.
        cause: the underlying exception.
    """

    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"dynamics solve failed at step {step}: {cause}")


class SingularJacobian(SlewkitError):
    """Pivoted factorization of the shooting Jacobian reports rank deficiency."""


class MaxIterationsExceeded(SlewkitError):
    """Newton loop hit the iteration cap before meeting the residual tolerance."""

    def __init__(self, iterations: int, final_residual: float):
        self.iterations = iterations
        self.final_residual = final_residual
        super().__init__(
            f"no convergence in {iterations} iterations "
            f"(final residual {final_residual:.3e})"
        )


class ActiveSetCycling(SlewkitError):
    """Active set alternated between two sets for too many iterations."""


class ParseError(SlewkitError):
    """Configuration file is not syntactically valid."""


class ValidationError(SlewkitError):
    """Configuration violates an invariant.

    Attributes:
        field: name of the offending config field.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
