"""Rotation-group primitives: hat/vee, Rodrigues exponential, logarithm,
quaternion conversions and the skew-part operator.

Conventions
-----------
- Rotations are 3x3 ndarrays, orthogonal with determinant +1.
- Quaternions are scalar-first ndarrays ``[q0, q1, q2, q3]`` with q0 >= 0
  (the canonical representative of the double cover).
- Axis-angle vectors are ``theta * axis`` in radians.

All functions are pure and allocate fresh arrays; nothing mutates its input,
so every operation is safe under concurrent use.

Orthogonality is *checked*, never silently re-projected: a rotation matrix
that drifts off the group indicates a bug upstream, not noise to hide.
"""

from __future__ import annotations

import numpy as np

from .errors import AngleNearPi, NotARotation, NotNormalized, NotSkewSymmetric

# Below this angle the closed-form sin/cos expressions lose digits to
# cancellation and the Taylor forms take over.
SMALL_ANGLE = 1e-8

# log_map refuses angles this close to pi, where the axis is ill-conditioned.
PI_GUARD = 1e-6

ORTHOGONALITY_TOL = 1e-9
QUAT_NORM_TOL = 1e-12
SKEW_TOL = 1e-8

_IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix S with S @ w == cross(v, w) for every w."""
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def vee(S: np.ndarray) -> np.ndarray:
    """Inverse of hat. Raises NotSkewSymmetric if ``S + S.T`` exceeds tolerance."""
    if np.max(np.abs(S + S.T)) > SKEW_TOL:
        raise NotSkewSymmetric(
            f"max |S + S^T| = {np.max(np.abs(S + S.T)):.3e} exceeds {SKEW_TOL:.1e}"
        )
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def skew_part(A: np.ndarray) -> np.ndarray:
    """Skew-symmetric part (A - A^T) / 2."""
    return (A - A.T) / 2.0


def exp_rodrigues(xi: np.ndarray) -> np.ndarray:
    """Matrix exponential of hat(xi) via the Rodrigues formula.

    R = I + sin(theta) K + (1 - cos(theta)) K^2 with K = hat(xi / theta).
    For theta < SMALL_ANGLE the second-order Taylor form
    I + hat(xi) + hat(xi)^2 / 2 avoids the 0/0 in the unit axis.
    """
    xi = np.asarray(xi, dtype=float)
    theta = float(np.linalg.norm(xi))
    K = hat(xi)
    if theta < SMALL_ANGLE:
        return np.eye(3) + K + K @ K / 2.0
    K /= theta
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def log_map(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector theta * axis of a rotation with angle below pi.

    The angle comes from atan2(|vee(R - R^T)| / 2, (trace(R) - 1) / 2), which
    is well conditioned everywhere the function accepts input. Near zero the
    first-order form vee(R - R^T) / 2 is exact to O(theta^3).

    Raises:
        AngleNearPi: if the rotation angle is within PI_GUARD of pi.
    """
    s_vec = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    sin_theta = float(np.linalg.norm(s_vec))
    cos_theta = (float(np.trace(R)) - 1.0) / 2.0
    theta = float(np.arctan2(sin_theta, cos_theta))
    if theta >= np.pi - PI_GUARD:
        raise AngleNearPi(f"rotation angle {theta:.9f} within {PI_GUARD:.1e} of pi")
    if theta < SMALL_ANGLE:
        return s_vec
    return (theta / sin_theta) * s_vec


def rotation_angle(R: np.ndarray) -> float:
    """Rotation angle in [0, pi] without the axis (defined at pi as well)."""
    s_vec = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    return float(np.arctan2(np.linalg.norm(s_vec), (float(np.trace(R)) - 1.0) / 2.0))


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion [q0, q1, q2, q3] (scalar first).

    Raises:
        NotNormalized: if | |q|^2 - 1 | exceeds QUAT_NORM_TOL.
    """
    q = np.asarray(q, dtype=float)
    norm_defect = abs(float(q @ q) - 1.0)
    if norm_defect > QUAT_NORM_TOL:
        raise NotNormalized(f"|q|^2 - 1 = {norm_defect:.3e} exceeds {QUAT_NORM_TOL:.1e}")
    return quat_to_rotation_unchecked(q)


def quat_to_rotation_unchecked(q: np.ndarray) -> np.ndarray:
    """quat_to_rotation without the norm check, for internal hot paths."""
    q0, q1, q2, q3 = q
    return np.array([
        [q0*q0 + q1*q1 - q2*q2 - q3*q3, 2*q1*q2 - 2*q0*q3, 2*q1*q3 + 2*q0*q2],
        [2*q1*q2 + 2*q0*q3, q0*q0 - q1*q1 + q2*q2 - q3*q3, 2*q2*q3 - 2*q0*q1],
        [2*q1*q3 - 2*q0*q2, 2*q2*q3 + 2*q0*q1, q0*q0 - q1*q1 - q2*q2 + q3*q3],
    ])


def rotation_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (q0 >= 0) of a rotation matrix, Shepperd's method.

    Picks the largest of the four squared components as pivot, which keeps
    the conversion stable for every rotation angle including pi.
    """
    t = float(np.trace(R))
    candidates = [t, R[0, 0], R[1, 1], R[2, 2]]
    pivot = int(np.argmax(candidates))
    if pivot == 0:
        r = np.sqrt(1.0 + t)
        s = 0.5 / r
        q = np.array([0.5 * r,
                      (R[2, 1] - R[1, 2]) * s,
                      (R[0, 2] - R[2, 0]) * s,
                      (R[1, 0] - R[0, 1]) * s])
    elif pivot == 1:
        r = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        s = 0.5 / r
        q = np.array([(R[2, 1] - R[1, 2]) * s,
                      0.5 * r,
                      (R[0, 1] + R[1, 0]) * s,
                      (R[0, 2] + R[2, 0]) * s])
    elif pivot == 2:
        r = np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2])
        s = 0.5 / r
        q = np.array([(R[0, 2] - R[2, 0]) * s,
                      (R[0, 1] + R[1, 0]) * s,
                      0.5 * r,
                      (R[1, 2] + R[2, 1]) * s])
    else:
        r = np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2])
        s = 0.5 / r
        q = np.array([(R[1, 0] - R[0, 1]) * s,
                      (R[0, 2] + R[2, 0]) * s,
                      (R[1, 2] + R[2, 1]) * s,
                      0.5 * r])
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def right_jacobian_inverse(c: np.ndarray) -> np.ndarray:
    """Inverse right Jacobian of SO(3) at axis-angle c.

    Maps body-frame tangent vectors of R = exp(hat(c)) into variations of c:
    if v = vee(skew_part-free R^T dR), then dc = right_jacobian_inverse(c) @ v.
    Closed form:

        I + hat(c)/2 + (1/theta^2)(1 - (theta/2) cot(theta/2)) hat(c)^2

    with the Taylor value 1/12 + theta^2/720 + ... for small theta.
    """
    theta2 = float(c @ c)
    C = hat(c)
    if theta2 < 1e-8:
        coeff = 1.0 / 12.0 + theta2 / 720.0
    else:
        theta = np.sqrt(theta2)
        half = theta / 2.0
        coeff = (1.0 - half / np.tan(half)) / theta2
    return np.eye(3) + 0.5 * C + coeff * (C @ C)


def require_rotation(R: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Validate orthogonality and det > 0; returns R unchanged.

    Raises:
        NotARotation: on drift beyond ORTHOGONALITY_TOL or a negative
            determinant. Never re-projects.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise NotARotation(f"{what} is not a finite 3x3 matrix")
    defect = float(np.max(np.abs(R.T @ R - np.eye(3))))
    if defect > ORTHOGONALITY_TOL:
        raise NotARotation(f"{what}: max |R^T R - I| = {defect:.3e}")
    if np.linalg.det(R) <= 0.0:
        raise NotARotation(f"{what}: determinant {np.linalg.det(R):.6f} not positive")
    return R


def require_unit_quaternion(q: np.ndarray, what: str = "quaternion") -> np.ndarray:
    """Validate unit norm and canonicalize sign to q0 >= 0."""
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise NotNormalized(f"{what} is not a finite 4-vector")
    if abs(float(q @ q) - 1.0) > QUAT_NORM_TOL:
        raise NotNormalized(f"{what}: |q|^2 - 1 = {abs(float(q @ q) - 1.0):.3e}")
    return -q if q[0] < 0.0 else q
