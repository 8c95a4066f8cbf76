"""slewkit: energy-optimal rigid-body attitude slews under torque and
momentum bounds.

The attitude dynamics are discretized on the rotation group itself (momentum
is conserved exactly under zero torque), the optimality system is reduced to
momentum and scaled costate variables, and the resulting two-point boundary
value problem is solved by a multiple-shooting Newton method with projection
and active-set handling for the momentum bounds.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .dynamics import (
    DynamicsState,
    InertiaModel,
    RelativeRotationSolution,
    trace_operator_small_angle_condition,
    trace_operator_cos_threshold,
    propagate,
    quaternion_sensitivity,
    rotation_sensitivity,
    sensitivity_matrices,
    solve_relative_rotation,
    step_forward,
    trace_operator,
)
from .errors import (
    ActiveSetCycling,
    AngleNearPi,
    DivisionByZeroMomentum,
    DynamicsFailure,
    MaxIterationsExceeded,
    NewtonDiverged,
    NotARotation,
    NotNormalized,
    NotSkewSymmetric,
    ParseError,
    SingularJacobian,
    SingularNewtonStep,
    SingularTraceOperator,
    SlewkitError,
    ValidationError,
)
from .optimality import (
    Bounds,
    compute_slack_beta,
    control_generalized_gradient,
    momentum_boundary_residual,
    optimal_control,
    orientation_constraint,
    orientation_constraint_gradient,
    orientation_log_correction,
    sigma_residual,
    xi_residual,
)
from .config import ManeuverConfig, load_config
from .shooting import (
    ActiveSet,
    ManeuverProblem,
    ShootingVector,
    SolverReport,
    assemble_jacobian,
    assemble_matching,
    default_initial_guess,
    enforce_active_constraints,
    identify_active_set,
    modified_shooting_solve,
    momentum_only_jacobian_diagnostic,
    momentum_only_residual,
    newton_solve,
    project_feasible,
    solve_momentum_only_staircase,
    terminal_orientation_error,
    update_costates_after_projection,
)
from .so3 import (
    exp_rodrigues,
    hat,
    log_map,
    quat_to_rotation,
    right_jacobian_inverse,
    rotation_to_quat,
    skew_part,
    vee,
)
