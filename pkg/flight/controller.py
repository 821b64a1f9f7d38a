"""
Geometric tracking control law.

Position loop with the auxiliary e_f filter and virtual input f_d, desired
attitude construction from f_d and the heading, thrust scaling, the
auxiliary attitude filter on SO(3) that yields (R_d, Omega_d, Omega_d_dot)
without differentiating R_c, and the attitude moment law.
"""

import logging
import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .dynamics import ControlInput, MultirotorState, NonFiniteError, VehicleParams, rkmk4_step
from .estimator import EstimatorGains, EstimatorOutput, FilterChain
from .so3 import E3, config_error, cosh_sinh, cross, e_matrix
from .trajectory import TrajectorySample

logger = logging.getLogger(__name__)

EF_LIMIT = 50.0
EF_MAX_SUBSTEPS = 10000


class ZeroThrustDirectionError(ArithmeticError):
    def __init__(self):
        super().__init__("Virtual input f_d is zero; thrust direction undefined")


class HeadingSingularError(ArithmeticError):
    def __init__(self, cross_norm: float, delta_A: float):
        self.cross_norm = cross_norm
        self.delta_A = delta_A
        super().__init__(
            f"Heading nearly parallel to thrust axis: |x_Bd x z_Bc| = {cross_norm:.3e} < {delta_A}"
        )


class RunMode(str, Enum):
    ORACLE = 'oracle'
    DEPLOYMENT = 'deployment'


class ThrustStrategy(str, Enum):
    LEE2010 = 'lee2010'
    KAR = 'kar'
    PROPOSED = 'proposed'


class AttitudeFilterForm(str, Enum):
    PRINTED = 'printed'
    LYAPUNOV = 'lyapunov'


@dataclass(frozen=True)
class ControllerGains:
    k_alpha: float
    alpha_x: float
    alpha_f: float
    k_R: float
    k_Omega: float
    gamma3: float
    gamma4: float
    delta_A: float = 0.1
    attitude_filter: AttitudeFilterForm = AttitudeFilterForm.PRINTED

    def __post_init__(self):
        for f in fields(self):
            if f.name == 'attitude_filter':
                continue
            value = getattr(self, f.name)
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"Controller gain {f.name} must be positive, got {value}")
        if self.delta_A > 1.0:
            raise ValueError(f"delta_A must lie in (0, 1], got {self.delta_A}")
        object.__setattr__(self, 'attitude_filter', AttitudeFilterForm(self.attitude_filter))

    def scaled_filter(self, s: float) -> 'ControllerGains':
        """gamma3 scaled by s and gamma4 by s^2, which keeps gamma4/gamma3^2 fixed."""
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values['gamma3'] = self.gamma3 * s
        values['gamma4'] = self.gamma4 * s * s
        return ControllerGains(**values)


@dataclass(frozen=True)
class PositionLoopState:
    e_f: np.ndarray

    @classmethod
    def zero(cls) -> 'PositionLoopState':
        return cls(e_f=np.zeros(3))


@dataclass(frozen=True)
class AttitudeFilterState:
    R_d: np.ndarray
    Omega_d: np.ndarray


class PositionErrors(NamedTuple):
    e_x: np.ndarray
    e_alpha: np.ndarray


def position_errors(s: MultirotorState, samp: TrajectorySample, v_d_used: np.ndarray,
                    pls: PositionLoopState, gains: ControllerGains) -> PositionErrors:
    e_x = s.x - samp.x_d
    e_alpha = (s.v - v_d_used) + gains.alpha_x * np.tanh(e_x) + np.tanh(pls.e_f)
    return PositionErrors(e_x, e_alpha)


def ef_rate(e_f: np.ndarray, e_alpha: np.ndarray, e_x: np.ndarray,
            gains: ControllerGains) -> np.ndarray:
    # Cosh^2(e_f) tanh(e_f) expanded to cosh sinh
    drive = -gains.k_alpha * e_alpha + np.tanh(e_x)
    c = np.cosh(e_f)
    return c * c * drive - gains.alpha_f * cosh_sinh(e_f)


def _ef_substeps(e_f: np.ndarray, e_alpha: np.ndarray, e_x: np.ndarray,
                 gains: ControllerGains, dt: float) -> int:
    drive = -gains.k_alpha * e_alpha + np.tanh(e_x)
    stiffness = math.cosh(2.0 * float(np.max(np.abs(e_f)))) * (
        gains.alpha_f + float(np.max(np.abs(drive)))
    )
    n = max(1, math.ceil(dt * stiffness))
    if n > EF_MAX_SUBSTEPS:
        logger.debug(f"e_f substeps capped at {EF_MAX_SUBSTEPS} (wanted {n})")
        n = EF_MAX_SUBSTEPS
    return n


def ef_advance(pls: PositionLoopState, e_alpha: np.ndarray, e_x: np.ndarray,
               gains: ControllerGains, dt: float) -> PositionLoopState:
    """RK4 on the e_f dynamics with e_alpha, e_x held over the step."""
    if dt <= 0.0:
        raise ValueError(f"Time step must be positive, got {dt}")
    e_f = pls.e_f.copy()
    n = _ef_substeps(e_f, e_alpha, e_x, gains, dt)
    if n > 1:
        logger.debug(f"e_f advanced with {n} substeps, |e_f|_inf={np.max(np.abs(e_f)):.3g}")
    h = dt / n
    for _ in range(n):
        k1 = ef_rate(e_f, e_alpha, e_x, gains)
        k2 = ef_rate(e_f + 0.5 * h * k1, e_alpha, e_x, gains)
        k3 = ef_rate(e_f + 0.5 * h * k2, e_alpha, e_x, gains)
        k4 = ef_rate(e_f + h * k3, e_alpha, e_x, gains)
        e_f = e_f + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(e_f)) or np.max(np.abs(e_f)) > EF_LIMIT:
            raise NonFiniteError('ef_advance', f"|e_f| exceeded {EF_LIMIT}, gains misconfigured")
    return PositionLoopState(e_f=e_f)


def virtual_input(e_x: np.ndarray, e_f: np.ndarray, g1: np.ndarray, p: VehicleParams,
                  gains: ControllerGains) -> np.ndarray:
    m = p.m
    return m * p.g * E3 - m * g1 + 2.0 * m * np.tanh(e_x) - m * gains.k_alpha * np.tanh(e_f)


def desired_attitude(f_d: np.ndarray, x_Bd: np.ndarray, gains: ControllerGains) -> np.ndarray:
    norm = float(np.linalg.norm(f_d))
    if norm == 0.0:
        raise ZeroThrustDirectionError()
    z_Bc = f_d / norm
    A = cross(x_Bd, z_Bc)
    a = float(np.linalg.norm(A))
    if a < gains.delta_A:
        raise HeadingSingularError(a, gains.delta_A)
    y_Bc = -A / a
    x_Bc = cross(y_Bc, z_Bc)
    return np.column_stack((x_Bc, y_Bc, z_Bc))


def thrust_axis_cosine(R_c: np.ndarray, R: np.ndarray) -> float:
    """cos of the angle between commanded and actual thrust axes, e3^T R_c^T R e3."""
    return float(R_c[:, 2] @ R[:, 2])


def thrust_scale(cos_theta: float, strategy: ThrustStrategy) -> float:
    if strategy == ThrustStrategy.LEE2010:
        return cos_theta
    if strategy == ThrustStrategy.KAR:
        return 1.0
    if strategy == ThrustStrategy.PROPOSED:
        return math.sqrt(max(0.0, 0.5 * (1.0 + cos_theta)))
    raise ValueError(f"Unknown thrust strategy: {strategy}")


def thrust(f_d: np.ndarray, R_c: np.ndarray, R: np.ndarray, strategy: ThrustStrategy) -> float:
    return float(np.linalg.norm(f_d)) * thrust_scale(thrust_axis_cosine(R_c, R), strategy)


def attitude_filter_rate(afs: AttitudeFilterState, R_c: np.ndarray,
                         gains: ControllerGains) -> np.ndarray:
    """Omega_d_dot at the current filter state."""
    e_Rdc = config_error(afs.R_d, R_c).e_R
    E = e_matrix(afs.R_d, R_c)
    e_Omega_dc = afs.Omega_d + e_Rdc / gains.gamma3
    coupling = E @ afs.Omega_d / gains.gamma3
    if gains.attitude_filter == AttitudeFilterForm.LYAPUNOV:
        return -e_Omega_dc / gains.gamma4 - e_Rdc - coupling
    return -e_Omega_dc / gains.gamma4 + e_Rdc + coupling


def attitude_filter_advance(afs: AttitudeFilterState, R_c: np.ndarray, gains: ControllerGains,
                            dt: float, substeps: int = 1) -> Tuple[AttitudeFilterState, np.ndarray]:
    """Advance (R_d, Omega_d) with R_c held; returns the rate used at the start of the step."""
    if dt <= 0.0:
        raise ValueError(f"Time step must be positive, got {dt}")
    Omega_d_dot = attitude_filter_rate(afs, R_c, gains)

    def filter_field(R_d, Omega_d):
        rate = attitude_filter_rate(AttitudeFilterState(R_d, Omega_d), R_c, gains)
        return Omega_d, rate

    R_d, Omega_d = afs.R_d, afs.Omega_d
    h = dt / substeps
    for _ in range(substeps):
        R_d, Omega_d = rkmk4_step(R_d, Omega_d, h, filter_field)
    if not (np.all(np.isfinite(R_d)) and np.all(np.isfinite(Omega_d))):
        raise NonFiniteError('attitude_filter_advance')
    return AttitudeFilterState(R_d=R_d, Omega_d=Omega_d), Omega_d_dot


def moment(s: MultirotorState, afs: AttitudeFilterState, Omega_d_dot: np.ndarray,
           p: VehicleParams, gains: ControllerGains) -> np.ndarray:
    e_R = config_error(s.R, afs.R_d).e_R
    RtRd = s.R.T @ afs.R_d
    ref_rate = RtRd @ afs.Omega_d
    e_Omega = s.Omega - ref_rate
    return (
        -gains.k_R * e_R
        - gains.k_Omega * e_Omega
        + cross(s.Omega, p.J @ s.Omega)
        - p.J @ (cross(s.Omega, ref_rate) - RtRd @ Omega_d_dot)
    )


class ControlStep(NamedTuple):
    e_x: np.ndarray
    e_alpha: np.ndarray
    e_f: np.ndarray
    v_d_used: np.ndarray
    estimate: EstimatorOutput
    f_d: np.ndarray
    R_c: np.ndarray
    R_d: np.ndarray
    Omega_d: np.ndarray
    Omega_d_dot: np.ndarray
    u: ControlInput


class GeometricController:
    """
    Owns the position-loop, attitude-filter and estimator states of one run.

    ``compute`` evaluates the control law at the current time; ``advance``
    integrates the internal filters over the step with the inputs held.
    """

    def __init__(self, vehicle: VehicleParams, gains: ControllerGains,
                 estimator_gains: EstimatorGains,
                 strategy: ThrustStrategy = ThrustStrategy.PROPOSED,
                 run_mode: RunMode = RunMode.ORACLE, attitude_substeps: int = 1):
        if attitude_substeps < 1:
            raise ValueError(f"attitude_substeps must be >= 1, got {attitude_substeps}")
        self.vehicle = vehicle
        self.gains = gains
        self.strategy = ThrustStrategy(strategy)
        self.run_mode = RunMode(run_mode)
        self.attitude_substeps = attitude_substeps
        self.position_loop = PositionLoopState.zero()
        self.attitude_filter: Optional[AttitudeFilterState] = None
        self.estimator = FilterChain(estimator_gains)
        self._last: Optional[ControlStep] = None

    def compute(self, s: MultirotorState, samp: TrajectorySample,
                v_d_oracle: Optional[np.ndarray] = None) -> ControlStep:
        if not self.estimator.state.latched:
            self.estimator.latch(samp.x_d)
        estimate = self.estimator.output

        if self.run_mode == RunMode.ORACLE:
            if v_d_oracle is None:
                raise ValueError("Oracle run mode needs the true desired velocity")
            v_d_used = np.asarray(v_d_oracle, dtype=float)
        else:
            v_d_used = estimate.g_xd

        e_x, e_alpha = position_errors(s, samp, v_d_used, self.position_loop, self.gains)
        f_d = virtual_input(e_x, self.position_loop.e_f, estimate.g1, self.vehicle, self.gains)
        R_c = desired_attitude(f_d, samp.x_Bd, self.gains)

        if self.attitude_filter is None:
            self.attitude_filter = AttitudeFilterState(R_d=R_c.copy(), Omega_d=np.zeros(3))
            logger.debug("Attitude filter initialised at R_c(0)")
        afs = self.attitude_filter

        Omega_d_dot = attitude_filter_rate(afs, R_c, self.gains)
        f = thrust(f_d, R_c, s.R, self.strategy)
        M = moment(s, afs, Omega_d_dot, self.vehicle, self.gains)

        self._last = ControlStep(
            e_x=e_x, e_alpha=e_alpha, e_f=self.position_loop.e_f.copy(), v_d_used=v_d_used,
            estimate=estimate, f_d=f_d, R_c=R_c, R_d=afs.R_d.copy(),
            Omega_d=afs.Omega_d.copy(), Omega_d_dot=Omega_d_dot,
            u=ControlInput(f=f, M=M),
        )
        return self._last

    def advance(self, next_sample: TrajectorySample, dt: float) -> None:
        if self._last is None:
            raise RuntimeError("advance() called before compute()")
        last = self._last
        self.position_loop = ef_advance(self.position_loop, last.e_alpha, last.e_x, self.gains, dt)
        self.attitude_filter, _ = attitude_filter_advance(
            self.attitude_filter, last.R_c, self.gains, dt, self.attitude_substeps
        )
        self.estimator.advance(next_sample.x_d, dt)
        self._last = None
