"""
Multirotor rigid-body plant, rotor mixing and the Lie-group Runge-Kutta
integrator shared by the plant and the auxiliary attitude filter.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np

from .so3 import E3, cross, exp_so3, hat, orthonormality_residual, project_to_so3

logger = logging.getLogger(__name__)

REPROJECT_TOL = 1e-12
MAX_MIXER_CONDITION = 1e12


class NonFiniteError(ArithmeticError):
    def __init__(self, where: str, detail: str = ''):
        self.where = where
        extra = f": {detail}" if detail else ''
        super().__init__(f"Non-finite value in {where}{extra}")


class RankDeficientError(ValueError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"Mixer matrix is ill-conditioned (cond = {condition:.3e})")


class NegativeThrustError(ValueError):
    def __init__(self, thrust: float):
        self.thrust = thrust
        super().__init__(f"Total thrust must be non-negative, got {thrust:.6g} N")


def check_finite(where: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(where)


@dataclass(frozen=True)
class MixerConfig:
    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim != 2 or gamma.shape[0] != 4 or gamma.shape[1] < 4:
            raise ValueError(f"Mixer must be 4 x n with n >= 4, got shape {gamma.shape}")
        object.__setattr__(self, 'gamma', gamma)

    @property
    def n(self) -> int:
        return self.gamma.shape[1]


def quad_x_mixer(arm: float = np.sqrt(2.0), thrust_coeff: float = 1.0,
                 moment_coeff: float = 1.0) -> MixerConfig:
    """Four rotors on the diagonals, alternating spin direction."""
    d = arm / np.sqrt(2.0)
    xs = np.array([d, -d, -d, d])
    ys = np.array([d, d, -d, -d])
    spin = np.array([1.0, -1.0, 1.0, -1.0])
    # thrust acts along -z_B, so a rotor at (x, y) produces (-y f, x f, 0)
    gamma = np.vstack([
        thrust_coeff * np.ones(4),
        -thrust_coeff * ys,
        thrust_coeff * xs,
        moment_coeff * spin,
    ])
    return MixerConfig(gamma)


@dataclass(frozen=True)
class VehicleParams:
    m: float
    J: np.ndarray
    g: float = 9.81
    mixer: Optional[MixerConfig] = None
    J_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        if J.shape != (3, 3):
            raise ValueError(f"Inertia must be 3x3 or a diagonal of 3, got shape {J.shape}")
        if not np.allclose(J, J.T, rtol=0.0, atol=1e-12):
            raise ValueError("Inertia matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(J)) <= 0.0:
            raise ValueError("Inertia matrix must be positive definite")
        if not self.m > 0.0:
            raise ValueError(f"Mass must be positive, got {self.m}")
        if not self.g > 0.0:
            raise ValueError(f"Gravity must be positive, got {self.g}")
        object.__setattr__(self, 'J', J)
        object.__setattr__(self, 'J_inv', np.linalg.inv(J))

    @property
    def lambda_min(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.J)))

    @property
    def lambda_max(self) -> float:
        return float(np.max(np.linalg.eigvalsh(self.J)))


@dataclass(frozen=True)
class MultirotorState:
    x: np.ndarray
    v: np.ndarray
    R: np.ndarray
    Omega: np.ndarray

    @classmethod
    def hover(cls, position=(0.0, 0.0, 0.0)) -> 'MultirotorState':
        return cls(
            x=np.array(position, dtype=float),
            v=np.zeros(3),
            R=np.eye(3),
            Omega=np.zeros(3),
        )


@dataclass(frozen=True)
class ControlInput:
    f: float
    M: np.ndarray


class StateDerivative(NamedTuple):
    x_dot: np.ndarray
    v_dot: np.ndarray
    Omega_hat: np.ndarray
    Omega_dot: np.ndarray


class RotorAllocation(NamedTuple):
    speeds_sq: np.ndarray
    infeasible: bool


def _angular_acceleration(Omega: np.ndarray, M: np.ndarray, p: VehicleParams) -> np.ndarray:
    return p.J_inv @ (M - cross(Omega, p.J @ Omega))


def state_derivative(s: MultirotorState, u: ControlInput, p: VehicleParams) -> StateDerivative:
    v_dot = p.g * E3 - (u.f / p.m) * s.R[:, 2]
    Omega_dot = _angular_acceleration(s.Omega, u.M, p)
    check_finite('state_derivative', s.v, v_dot, Omega_dot)
    return StateDerivative(
        x_dot=s.v.copy(),
        v_dot=v_dot,
        Omega_hat=hat(s.Omega),
        Omega_dot=Omega_dot,
    )


def _dexpinv(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    # for R = R0 exp(u^): u_dot = w + 1/2 u x w + 1/12 u x (u x w) + O(|u|^3)
    uw = cross(u, w)
    return w + 0.5 * uw + cross(u, uw) / 12.0


# field(R, y) -> (body rate generating R_dot = R hat(rate), y_dot)
VectorField = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


def rkmk4_step(R: np.ndarray, y: np.ndarray, dt: float,
               field: VectorField) -> Tuple[np.ndarray, np.ndarray]:
    """
    One fourth-order Runge-Kutta-Munthe-Kaas step on SO(3) x R^n.

    The vector part is classical RK4. The attitude is advanced once per step
    as R <- R exp(dt * Omega_eff), Omega_eff being the RK4-weighted stage
    rates with the commutator corrections that keep the update fourth order.
    """
    w1, k1 = field(R, y)
    th1 = dt * w1

    u2 = 0.5 * th1
    w2, k2 = field(R @ exp_so3(u2), y + 0.5 * dt * k1)
    th2 = dt * _dexpinv(u2, w2)

    u3 = 0.5 * th2
    w3, k3 = field(R @ exp_so3(u3), y + 0.5 * dt * k2)
    th3 = dt * _dexpinv(u3, w3)

    u4 = th3
    w4, k4 = field(R @ exp_so3(u4), y + dt * k3)
    th4 = dt * _dexpinv(u4, w4)

    y_next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    R_next = R @ exp_so3((th1 + 2.0 * th2 + 2.0 * th3 + th4) / 6.0)

    residual = orthonormality_residual(R_next)
    if residual > REPROJECT_TOL:
        logger.debug(f"Re-projecting attitude onto SO(3), residual {residual:.2e}")
        R_next = project_to_so3(R_next)
    return R_next, y_next


def step(s: MultirotorState, u: ControlInput, p: VehicleParams, dt: float) -> MultirotorState:
    """Advance the plant by dt with the input held constant."""
    if dt <= 0.0:
        raise ValueError(f"Time step must be positive, got {dt}")
    if u.f < 0.0:
        raise NegativeThrustError(u.f)

    thrust_acc = u.f / p.m
    gravity = p.g * E3
    M = np.asarray(u.M, dtype=float)

    def plant_field(R, y):
        v = y[3:6]
        Omega = y[6:9]
        v_dot = gravity - thrust_acc * R[:, 2]
        Omega_dot = _angular_acceleration(Omega, M, p)
        return Omega, np.concatenate((v, v_dot, Omega_dot))

    y = np.concatenate((s.x, s.v, s.Omega))
    R_next, y_next = rkmk4_step(s.R, y, dt, plant_field)
    check_finite('dynamics.step', R_next, y_next)
    return MultirotorState(x=y_next[0:3], v=y_next[3:6], R=R_next, Omega=y_next[6:9])


def allocate_rotors(u: ControlInput, mix: MixerConfig) -> RotorAllocation:
    """Minimum-norm squared rotor speeds; negative entries are flagged, not clamped."""
    condition = float(np.linalg.cond(mix.gamma))
    if not np.isfinite(condition) or condition > MAX_MIXER_CONDITION:
        raise RankDeficientError(condition)

    wrench = np.concatenate(([u.f], np.asarray(u.M, dtype=float)))
    speeds_sq = np.linalg.pinv(mix.gamma) @ wrench
    infeasible = bool(np.any(speeds_sq < -1e-12))
    if infeasible:
        logger.debug(f"Rotor allocation infeasible: {speeds_sq}")
    return RotorAllocation(speeds_sq=speeds_sq, infeasible=infeasible)
