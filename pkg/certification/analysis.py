"""
Gain certificate: bound constants, gain conditions, Lyapunov functions and
the ultimate bound of the closed-loop tracking errors.

Everything in this module is a pure function of its inputs. Failing gain
conditions are reported in the certificate, never raised.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from flight.controller import AttitudeFilterState, ControllerGains, PositionLoopState
from flight.dynamics import MultirotorState, VehicleParams
from flight.estimator import EstimatorGains
from flight.so3 import config_error, log_cosh, log_so3
from flight.trajectory import Trajectory, TrajectoryBounds, TrajectorySample

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)

G1_BOUND_PROJECTION = 'projection'
G1_BOUND_NOMINAL = 'nominal'

# condition name -> the inequality it certifies
CONDITIONS = {
    'virtual_input_positive': 'k_alpha < g - h2 - 2 (f_d stays away from zero)',
    'acceleration_bound': "h2 >= sup |x_d''| (the projection ball contains the true acceleration)",
    'translational_damping': 'lambda1 > 0',
    'position_gain': 'lambda2 > 0',
    'attitude_filter_rate': 'lambda4 > 0 (gamma3 < 1/(4 alpha1^2))',
    'auxiliary_gain_order': 'lambda3 > 0 (alpha_f > alpha_x)',
    'angular_rate_damping': 'lambda6 > 0',
    'attitude_stiffness': 'lambda7 > 0',
    'attitude_decay_rate': 'beta_bar > 0',
    'e_alpha_domain': 'e_alpha_bar >= sqrt(2 max(V(0), D/lambda_V) / m)',
}


class InitialFilterErrors(NamedTuple):
    e_gx0: float
    e_xdd0: float
    e_gv0: float
    e_g10: float


@dataclass(frozen=True)
class CertificateInputs:
    vehicle: VehicleParams
    gains: ControllerGains
    estimator: EstimatorGains
    bounds: TrajectoryBounds
    c1: float
    L1: float
    rho02: float
    e_alpha_bar: float
    e_gx0: float = 0.0
    e_xdd0: float = 0.0
    e_gv0: float = 0.0
    e_g10: float = 0.0
    g1_bound: str = G1_BOUND_PROJECTION
    V0: float = 0.0

    def __post_init__(self):
        for name in ('c1', 'L1', 'rho02', 'e_alpha_bar'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be positive, got {value}")
        for name in ('e_gx0', 'e_xdd0', 'e_gv0', 'e_g10', 'V0'):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if self.g1_bound not in (G1_BOUND_PROJECTION, G1_BOUND_NOMINAL):
            raise ValueError(f"g1_bound must be 'projection' or 'nominal', got {self.g1_bound!r}")

    @property
    def g1_limit(self) -> float:
        if self.g1_bound == G1_BOUND_NOMINAL:
            return self.estimator.h2
        return self.estimator.projection_radius


@dataclass(frozen=True)
class CertificateReport:
    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    alpha5: float
    alpha6: float
    alpha7: float
    rho03: float
    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float
    lambda5: float
    lambda6: float
    lambda7: float
    lambda_bar1: float
    lambda_bar2: float
    lambda_max_W12: float
    beta_bar: float
    lambda_V: float
    D: float
    D_asymptotic: float
    ultimate_bound: Optional[float]
    e_alpha_required: Optional[float]
    roa_psi_max: float
    roa_rate_coeff_J: float
    roa_rate_coeff_unit: float
    g1_bound: str
    condition_flags: Dict[str, bool] = field(default_factory=dict)
    # where L1 and rho02 came from: 'scenario' or 'estimate'
    omega_c_source: str = 'scenario'
    # e_alpha_bar was set to the required value rather than given
    e_alpha_bar_assumed: bool = False

    @property
    def passed(self) -> bool:
        return all(self.condition_flags.values())

    @property
    def failing(self) -> List[str]:
        return [name for name, ok in self.condition_flags.items() if not ok]

    def roa_rate_limit(self, psi0: float, weighting: str = 'J') -> float:
        """Largest |e_Omega(0)| admitted by the attitude-loop region of attraction."""
        if not 0.0 <= psi0 < self.roa_psi_max:
            return 0.0
        coeff = self.roa_rate_coeff_J if weighting == 'J' else self.roa_rate_coeff_unit
        return math.sqrt(coeff * (self.roa_psi_max - psi0))

    def as_dict(self) -> Dict:
        data = asdict(self)
        data['passed'] = self.passed
        data['failing'] = self.failing
        return data


def _filter_constants(est: EstimatorGains, b: TrajectoryBounds, e_gx0: float, e_xdd0: float,
                      e_gv0: float, e_g10: float) -> Tuple[float, float, float, float, float]:
    alpha3 = max(e_gx0, est.gamma1 * b.h2)
    alpha4 = max(e_xdd0, est.gamma1 * b.h3)
    alpha5 = max(e_gv0, (est.gamma2 / est.gamma1) * alpha4)
    alpha7 = 8.0 * (alpha4 ** 2 + alpha5 ** 2) + 2.0 * est.gamma21 ** 2 * b.h3 ** 2
    alpha6 = max(e_g10, math.sqrt(alpha7))
    return alpha3, alpha4, alpha5, alpha6, alpha7


def w_matrices(vehicle: VehicleParams, gains: ControllerGains, c1: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sandwich matrices of the attitude Lyapunov function, used as W (x) I3 on [e_R, e_Omega]."""
    half = 0.5 * c1
    W11 = np.array([[gains.k_R, half], [half, 0.5 * vehicle.lambda_min]])
    W12 = np.array([[2.0 * gains.k_R, half], [half, 0.5 * vehicle.lambda_max]])
    return W11, W12


def _filter_residual_coefficient(gains: ControllerGains) -> float:
    return gains.gamma3 / 2.0 + gains.gamma4 / (8.0 * gains.gamma3 ** 2)


def compute_constants(ci: CertificateInputs) -> CertificateReport:
    p, k, est = ci.vehicle, ci.gains, ci.estimator
    m, g = p.m, p.g
    h2 = ci.g1_limit
    lam_min, lam_max = p.lambda_min, p.lambda_max

    alpha1 = m * g + m * h2 + 2.0 * SQRT3 * m + SQRT3 * m * k.k_alpha
    alpha2 = m * g - m * h2 - 2.0 * m - m * k.k_alpha
    alpha3, alpha4, alpha5, alpha6, alpha7 = _filter_constants(
        est, ci.bounds, ci.e_gx0, ci.e_xdd0, ci.e_gv0, ci.e_g10
    )
    alpha6_asymptotic = _filter_constants(est, ci.bounds, 0.0, 0.0, 0.0, 0.0)[3]

    rho03 = m / 2.0 + 1.0 + ci.L1 ** 2 * (4.0 * k.gamma3 ** 2 + k.gamma4) / (8.0 * k.gamma3 ** 2)
    lambda1 = m * k.k_alpha - m * k.alpha_x * (3.0 * k.alpha_x + 1.0) / 2.0 - m * k.alpha_f / 2.0 - rho03
    lambda2 = m * k.alpha_x - m * k.alpha_x ** 2 / 2.0
    lambda3 = m * k.alpha_f / 2.0 - m * k.alpha_x / 2.0
    lambda4 = 1.0 / (2.0 * k.gamma3) - 2.0 * alpha1 ** 2
    lambda5 = 1.0 / (2.0 * k.gamma4)
    lambda_bar1 = k.k_Omega - ci.c1 / 2.0 - ci.c1 * k.k_Omega / (2.0 * lam_min)
    lambda_bar2 = ci.c1 * k.k_R / lam_max - ci.c1 * k.k_Omega / (2.0 * lam_min)
    lambda6 = lambda_bar1
    lambda7 = lambda_bar2 - 2.0 * alpha1 ** 2

    _, W12 = w_matrices(p, k, ci.c1)
    lambda_max_W12 = float(np.max(np.linalg.eigvalsh(W12)))
    beta_bar = min(lambda_bar1, lambda_bar2) / lambda_max_W12

    coeff = _filter_residual_coefficient(k)
    D = coeff * ci.rho02 ** 2 + (m / 2.0) * alpha6 ** 2
    D_asymptotic = coeff * ci.rho02 ** 2 + (m / 2.0) * alpha6_asymptotic ** 2
    lambda_V = min(lambda1, lambda2, lambda3, lambda4, lambda5, lambda6, lambda7)

    if lambda_V > 0.0:
        ultimate_bound = D / lambda_V
        e_alpha_required = math.sqrt(2.0 * max(ci.V0, ultimate_bound) / m)
    else:
        ultimate_bound = None
        e_alpha_required = None

    flags = {
        'virtual_input_positive': k.k_alpha < g - h2 - 2.0,
        'acceleration_bound': est.h2 >= ci.bounds.h2,
        'translational_damping': lambda1 > 0.0,
        'position_gain': lambda2 > 0.0,
        'attitude_filter_rate': lambda4 > 0.0,
        'auxiliary_gain_order': lambda3 > 0.0,
        'angular_rate_damping': lambda6 > 0.0,
        'attitude_stiffness': lambda7 > 0.0,
        'attitude_decay_rate': beta_bar > 0.0,
        'e_alpha_domain': e_alpha_required is not None and ci.e_alpha_bar >= e_alpha_required,
    }

    report = CertificateReport(
        alpha1=alpha1, alpha2=alpha2, alpha3=alpha3, alpha4=alpha4, alpha5=alpha5,
        alpha6=alpha6, alpha7=alpha7, rho03=rho03,
        lambda1=lambda1, lambda2=lambda2, lambda3=lambda3, lambda4=lambda4,
        lambda5=lambda5, lambda6=lambda6, lambda7=lambda7,
        lambda_bar1=lambda_bar1, lambda_bar2=lambda_bar2,
        lambda_max_W12=lambda_max_W12, beta_bar=beta_bar,
        lambda_V=lambda_V, D=D, D_asymptotic=D_asymptotic,
        ultimate_bound=ultimate_bound, e_alpha_required=e_alpha_required,
        roa_psi_max=2.0,
        roa_rate_coeff_J=2.0 * k.k_R / lam_max,
        roa_rate_coeff_unit=2.0 * k.k_R,
        g1_bound=ci.g1_bound,
        condition_flags=flags,
    )
    if not report.passed:
        logger.debug(f"Certificate failing conditions: {report.failing}")
    return report


def initial_filter_errors(trajectory: Trajectory, est: EstimatorGains) -> InitialFilterErrors:
    """Filter errors at t = 0, where g_xd = g_vd = g1 = 0."""
    o = trajectory.oracle(0.0)
    v0 = float(np.linalg.norm(o.v_d))
    return InitialFilterErrors(
        e_gx0=v0,
        e_xdd0=float(np.linalg.norm(o.a_d - o.v_d / est.gamma1)),
        e_gv0=v0 / est.gamma1,
        e_g10=float(np.linalg.norm(o.a_d)),
    )


class OmegaCBound(NamedTuple):
    L1: float
    rho02: float
    slope: float
    offset: float


def estimate_omega_c_bound(vehicle: VehicleParams, gains: ControllerGains, est: EstimatorGains,
                           bounds: TrajectoryBounds, errors: InitialFilterErrors,
                           e_alpha_bar: float, samples: int = 64) -> OmegaCBound:
    """
    Fit |Omega_c|^2 <= L1^2 |e_alpha|^2 + rho02^2 on |e_alpha| <= e_alpha_bar.

    The bound chain on |Omega_c| is evaluated over a grid of (|e_alpha|,
    |tanh e_x|, |tanh e_f|); the affine envelope slope*|e_alpha| + offset is
    then squared with (a + b)^2 <= 2a^2 + 2b^2.
    """
    m, k = vehicle.m, gains
    h2 = est.h2
    alpha2 = m * vehicle.g - m * est.projection_radius - 2.0 * m - m * k.k_alpha
    if alpha2 <= 0.0:
        raise ValueError("Omega_c bound needs |f_d| bounded away from zero (alpha2 > 0)")
    _, alpha4, alpha5, alpha6, _ = _filter_constants(est, bounds, *errors)

    e_alpha = np.linspace(0.0, e_alpha_bar, samples)
    tx = np.linspace(0.0, SQRT3, 8)
    tf = np.linspace(0.0, SQRT3, 8)
    ea, ex, ef = np.meshgrid(e_alpha, tx, tf, indexing='ij')

    filter_part = (m / est.gamma21) * (1.0 + (est.eps0 + 2.0 * h2) / h2 ** 2) * (alpha6 + alpha5 + alpha4)
    fd_rate = (
        filter_part
        + 2.0 * m * (ea + k.alpha_x * ex + ef)
        + m * k.k_alpha ** 2 * ea
        + m * k.k_alpha * ex
        + m * k.k_alpha * k.alpha_f * ef
    )
    omega_c = (4.0 + 4.0 / k.delta_A) * fd_rate / alpha2 + 4.0 * bounds.h5 / k.delta_A
    envelope = omega_c.max(axis=(1, 2))

    offset = float(envelope[0])
    slope = float(np.max((envelope[1:] - offset) / e_alpha[1:])) if samples > 1 else 0.0
    logger.debug(f"Omega_c envelope: slope={slope:.6g} offset={offset:.6g}")
    return OmegaCBound(L1=math.sqrt(2.0) * slope, rho02=math.sqrt(2.0) * offset,
                       slope=slope, offset=offset)


class LyapunovValues(NamedTuple):
    V2: float
    V2_J: float
    V3: float
    V4: float
    V: float
    e_norm_sq: float


def lyapunov_eval(s: MultirotorState, afs: AttitudeFilterState, pls: PositionLoopState,
                  R_c: np.ndarray, samp: TrajectorySample, ci: CertificateInputs,
                  v_d: np.ndarray) -> LyapunovValues:
    """Lyapunov functions along the closed loop; v_d is the velocity reference defining e_alpha."""
    p, k = ci.vehicle, ci.gains
    m = p.m

    e_Rd = config_error(s.R, afs.R_d)
    e_Omega_d = s.Omega - s.R.T @ (afs.R_d @ afs.Omega_d)
    e_Rdc = config_error(afs.R_d, R_c)
    e_Omega_dc = afs.Omega_d + e_Rdc.e_R / k.gamma3

    e_x = s.x - samp.x_d
    tanh_ex = np.tanh(e_x)
    tanh_ef = np.tanh(pls.e_f)
    e_alpha = (s.v - v_d) + k.alpha_x * tanh_ex + tanh_ef

    cross_term = ci.c1 * float(e_Omega_d @ e_Rd.e_R)
    attitude_potential = k.k_R * e_Rd.psi
    V2 = 0.5 * float(e_Omega_d @ e_Omega_d) + attitude_potential + cross_term
    V2_J = 0.5 * float(e_Omega_d @ (p.J @ e_Omega_d)) + attitude_potential + cross_term
    V3 = (
        0.5 * m * float(e_alpha @ e_alpha)
        + m * float(np.sum(log_cosh(e_x)))
        + 0.5 * m * float(tanh_ef @ tanh_ef)
    )
    V4 = e_Rdc.psi + 0.5 * float(e_Omega_dc @ e_Omega_dc)

    e_norm_sq = (
        float(e_Rd.e_R @ e_Rd.e_R) + float(e_Omega_d @ e_Omega_d)
        + float(e_Rdc.e_R @ e_Rdc.e_R) + float(e_Omega_dc @ e_Omega_dc)
        + float(e_alpha @ e_alpha) + float(tanh_ex @ tanh_ex) + float(tanh_ef @ tanh_ef)
    )
    return LyapunovValues(V2=V2, V2_J=V2_J, V3=V3, V4=V4, V=V2 + V3 + V4, e_norm_sq=e_norm_sq)


def omega_c_diagnostic(R_c_prev: np.ndarray, R_c_next: np.ndarray, dt: float) -> np.ndarray:
    """Body rate of R_c from two consecutive samples."""
    if dt <= 0.0:
        raise ValueError(f"Time step must be positive, got {dt}")
    # raises NearAntipodalError for a half-turn between samples
    config_error(R_c_next, R_c_prev)
    return log_so3(R_c_prev.T @ R_c_next) / dt
