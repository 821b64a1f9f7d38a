"""
Rotation-group kernel - hat/vee maps, exponential and log maps, attitude
error functions and the componentwise hyperbolic maps used by the
position loop.
"""

import logging
from typing import NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation

logger = logging.getLogger(__name__)

E3 = np.array([0.0, 0.0, 1.0])
I3 = np.eye(3)

# 1 + tr(R1^T R2) below this is treated as a 180 degree error
PSI_EPS = 1e-8
SMALL_ANGLE = 1e-8
SKEW_TOL = 1e-9
# |x| beyond this makes sech^2 < 1e-25
HYPERBOLIC_CLAMP = 30.0


class NotSkewError(ValueError):
    def __init__(self, asymmetry: float):
        self.asymmetry = asymmetry
        super().__init__(f"Matrix is not skew-symmetric: |S + S^T| = {asymmetry:.3e}")


class NearAntipodalError(ArithmeticError):
    """Raised when two attitudes are (numerically) 180 degrees apart."""

    def __init__(self, trace_term: float, where: str = ''):
        self.trace_term = trace_term
        self.psi = 2.0 - np.sqrt(max(trace_term, 0.0))
        self.where = where
        label = f" in {where}" if where else ''
        super().__init__(
            f"Attitude error undefined{label}: 1 + tr = {trace_term:.3e} (psi ~ {self.psi:.9f})"
        )


class AttitudeError(NamedTuple):
    psi: float
    e_R: np.ndarray


class SaturationMaps(NamedTuple):
    tanh: np.ndarray
    cosh2: np.ndarray
    sech2: np.ndarray


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross carries a lot of overhead for 3-vectors in the step loop
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix with hat(v) @ w == v x w."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _vee(S: np.ndarray) -> np.ndarray:
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def vee(S: np.ndarray) -> np.ndarray:
    asymmetry = float(np.linalg.norm(S + S.T))
    if asymmetry >= SKEW_TOL:
        raise NotSkewError(asymmetry)
    return _vee(S)


def exp_so3(v: np.ndarray) -> np.ndarray:
    """Rodrigues' formula; series coefficients below SMALL_ANGLE."""
    theta = float(np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
    V = hat(v)
    if theta < SMALL_ANGLE:
        theta2 = theta * theta
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
    else:
        a = np.sin(theta) / theta
        half = np.sin(0.5 * theta) / theta
        b = 2.0 * half * half
    return I3 + a * V + b * (V @ V)


def log_so3(R: np.ndarray) -> np.ndarray:
    """Rotation vector theta with exp_so3(theta) == R, |theta| <= pi."""
    return Rotation.from_matrix(R).as_rotvec()


def rotation_x(angle: float) -> np.ndarray:
    return exp_so3(np.array([angle, 0.0, 0.0]))


def rotation_y(angle: float) -> np.ndarray:
    return exp_so3(np.array([0.0, angle, 0.0]))


def rotation_z(angle: float) -> np.ndarray:
    return exp_so3(np.array([0.0, 0.0, angle]))


def orthonormality_residual(R: np.ndarray) -> float:
    return float(np.linalg.norm(R.T @ R - I3))


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return (
        orthonormality_residual(R) < tol
        and float(np.linalg.norm(R @ R.T - I3)) < tol
        and abs(float(np.linalg.det(R)) - 1.0) < tol
    )


def project_to_so3(M: np.ndarray) -> np.ndarray:
    """Closest rotation in Frobenius norm (polar factor)."""
    U, _, Vt = np.linalg.svd(M)
    if np.linalg.det(U @ Vt) < 0.0:
        U[:, -1] = -U[:, -1]
    return U @ Vt


def _trace_term(R2: np.ndarray, R1: np.ndarray, where: str) -> float:
    # 1 + tr(R1^T R2) without forming the product
    t = 1.0 + float(np.sum(R1 * R2))
    if t <= PSI_EPS:
        raise NearAntipodalError(t, where)
    return t


def config_error(R2: np.ndarray, R1: np.ndarray) -> AttitudeError:
    """Configuration error psi(R2, R1) and attitude error vector e_R(R2, R1)."""
    t = _trace_term(R2, R1, 'config_error')
    root = np.sqrt(t)
    A = R1.T @ R2
    e_R = _vee(A - A.T) / (2.0 * root)
    return AttitudeError(psi=2.0 - root, e_R=e_R)


def angular_velocity_error(
    R2: np.ndarray, Omega2: np.ndarray, R1: np.ndarray, Omega1: np.ndarray
) -> np.ndarray:
    return Omega2 - R2.T @ (R1 @ Omega1)


def e_matrix(R2: np.ndarray, R1: np.ndarray) -> np.ndarray:
    """Matrix E(R2, R1) with d/dt e_R = E e_Omega; spectral norm 1/2."""
    t = _trace_term(R2, R1, 'e_matrix')
    root = np.sqrt(t)
    B = R2.T @ R1
    e_R = _vee(B.T - B) / (2.0 * root)
    return (np.trace(B) * I3 - B + 2.0 * np.outer(e_R, e_R)) / (2.0 * root)


def saturation_maps(v: np.ndarray) -> SaturationMaps:
    clamped = np.clip(v, -HYPERBOLIC_CLAMP, HYPERBOLIC_CLAMP)
    c = np.cosh(clamped)
    cosh2 = c * c
    return SaturationMaps(
        tanh=np.tanh(v),
        cosh2=np.diag(cosh2),
        sech2=np.diag(1.0 / cosh2),
    )


def cosh_sinh(v: np.ndarray) -> np.ndarray:
    """Componentwise cosh(v) * sinh(v), i.e. Cosh^2(v) tanh(v) without the product."""
    return 0.5 * np.sinh(2.0 * v)


def log_cosh(v: np.ndarray) -> np.ndarray:
    """Componentwise ln cosh(v), finite for any finite v."""
    a = np.abs(v)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)
