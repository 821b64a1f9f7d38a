"""
Reference derivative estimator.

A cascade of first-order filters yields estimates of the desired velocity
(g_xd) and acceleration (g_vd) from x_d alone. A projection filter smooths
g_vd into g1, which is kept inside the ball |g1|^2 <= h2^2 (1 + eps0).
"""

import logging
import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .dynamics import check_finite

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimatorGains:
    gamma1: float
    gamma2: float
    gamma21: float
    eps0: float
    h2: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"Estimator gain {f.name} must be positive, got {value}")

    @property
    def projection_radius(self) -> float:
        return self.h2 * math.sqrt(1.0 + self.eps0)

    def scaled(self, s: float) -> 'EstimatorGains':
        return EstimatorGains(
            gamma1=self.gamma1 * s, gamma2=self.gamma2 * s, gamma21=self.gamma21 * s,
            eps0=self.eps0, h2=self.h2,
        )


@dataclass(frozen=True)
class EstimatorState:
    """
    Filter states at time t.

    x_lag is x_fd + exp(-t/gamma1) x_d0, the quantity actually integrated;
    g_xd = (x_d - x_lag)/gamma1 then cancels exactly for constant inputs.
    """

    x_fd: np.ndarray
    x_lag: np.ndarray
    g_fd: np.ndarray
    g1: np.ndarray
    x_d0: Optional[np.ndarray] = None
    g_xd0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0
    x_d_last: Optional[np.ndarray] = None

    @classmethod
    def initial(cls) -> 'EstimatorState':
        zero = np.zeros(3)
        return cls(x_fd=zero, x_lag=zero.copy(), g_fd=zero.copy(), g1=zero.copy())

    @property
    def latched(self) -> bool:
        return self.x_d0 is not None


class EstimatorOutput(NamedTuple):
    g_xd: np.ndarray
    g_vd: np.ndarray
    g1: np.ndarray


def projection_correction(g1: np.ndarray, phi: np.ndarray, gains: EstimatorGains) -> np.ndarray:
    """The rank-one term subtracted from phi by the projection; zero when inactive."""
    h2sq = gains.h2 * gains.h2
    scale = gains.eps0 * h2sq
    f = (float(g1 @ g1) - h2sq) / scale
    grad = 2.0 * g1 / scale
    # boundary f == 0 takes the unprojected branch
    if f <= 0.0 or float(phi @ grad) <= 0.0:
        return np.zeros(3)
    return grad * (float(grad @ phi) / float(grad @ grad)) * f


def _projected_rate(g1: np.ndarray, g_vd: np.ndarray, gains: EstimatorGains) -> np.ndarray:
    phi = (g_vd - g1) / gains.gamma21
    return phi - projection_correction(g1, phi, gains)


def _outputs(x_d: np.ndarray, x_lag: np.ndarray, g_fd: np.ndarray,
             gains: EstimatorGains) -> Tuple[np.ndarray, np.ndarray]:
    g_xd = (x_d - x_lag) / gains.gamma1
    # g_xd(0) = 0, so the exp(-t/gamma2) g_xd0 term vanishes
    g_vd = (g_xd - g_fd) / gains.gamma2
    return g_xd, g_vd


def estimator_outputs(st: EstimatorState, gains: EstimatorGains) -> EstimatorOutput:
    if not st.latched:
        zero = np.zeros(3)
        return EstimatorOutput(zero, zero.copy(), zero.copy())
    g_xd, g_vd = _outputs(st.x_d_last, st.x_lag, st.g_fd, gains)
    return EstimatorOutput(g_xd, g_vd, st.g1.copy())


def latch(x_d: np.ndarray) -> EstimatorState:
    """State at t = 0 with x_d(0) stored; x_fd(0) = g_fd(0) = g1(0) = 0."""
    x_d0 = np.array(x_d, dtype=float)
    return EstimatorState(
        x_fd=np.zeros(3), x_lag=x_d0.copy(), g_fd=np.zeros(3), g1=np.zeros(3),
        x_d0=x_d0, g_xd0=np.zeros(3), t=0.0, x_d_last=x_d0.copy(),
    )


def estimator_advance(st: EstimatorState, gains: EstimatorGains, x_d: np.ndarray,
                      dt: float) -> Tuple[EstimatorState, np.ndarray, np.ndarray, np.ndarray]:
    """
    Consume the next position sample and return (state, g_xd, g_vd, g1).

    The first call latches x_d(0) and returns the t = 0 outputs (all zero).
    Later calls integrate over [t, t + dt] with x_d interpolated linearly
    between the previous sample and this one.
    """
    if dt <= 0.0:
        raise ValueError(f"Time step must be positive, got {dt}")
    x_d = np.asarray(x_d, dtype=float)

    if not st.latched:
        latched = latch(x_d)
        out = estimator_outputs(latched, gains)
        return latched, out.g_xd, out.g_vd, out.g1

    x_prev = st.x_d_last
    slope = (x_d - x_prev) / dt

    def rate(tau: float, y: np.ndarray) -> np.ndarray:
        x_lag, g_fd, g1 = y[0:3], y[3:6], y[6:9]
        x_ref = x_prev + tau * slope
        g_xd, g_vd = _outputs(x_ref, x_lag, g_fd, gains)
        return np.concatenate((
            (x_ref - x_lag) / gains.gamma1,
            (g_xd - g_fd) / gains.gamma2,
            _projected_rate(g1, g_vd, gains),
        ))

    y = np.concatenate((st.x_lag, st.g_fd, st.g1))
    k1 = rate(0.0, y)
    k2 = rate(0.5 * dt, y + 0.5 * dt * k1)
    k3 = rate(0.5 * dt, y + 0.5 * dt * k2)
    k4 = rate(dt, y + dt * k3)
    y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    check_finite('estimator_advance', y)

    x_lag, g_fd, g1 = y[0:3], y[3:6], y[6:9]
    limit = gains.h2 * gains.h2 * (1.0 + gains.eps0)
    norm_sq = float(g1 @ g1)
    if norm_sq > limit:
        logger.debug(f"Projection overshoot |g1|^2={norm_sq:.6g} > {limit:.6g}, rescaling")
        g1 = g1 * math.sqrt(limit / norm_sq)

    t = st.t + dt
    nxt = EstimatorState(
        x_fd=x_lag - math.exp(-t / gains.gamma1) * st.x_d0,
        x_lag=x_lag, g_fd=g_fd, g1=g1,
        x_d0=st.x_d0, g_xd0=st.g_xd0, t=t, x_d_last=x_d.copy(),
    )
    out = estimator_outputs(nxt, gains)
    return nxt, out.g_xd, out.g_vd, out.g1


class FilterChain:
    """Stateful wrapper owning one estimator run."""

    def __init__(self, gains: EstimatorGains):
        self.gains = gains
        self.state = EstimatorState.initial()
        self.output = EstimatorOutput(np.zeros(3), np.zeros(3), np.zeros(3))

    def advance(self, x_d: np.ndarray, dt: float) -> EstimatorOutput:
        self.state, g_xd, g_vd, g1 = estimator_advance(self.state, self.gains, x_d, dt)
        self.output = EstimatorOutput(g_xd, g_vd, g1)
        return self.output

    def latch(self, x_d: np.ndarray) -> EstimatorOutput:
        self.state = latch(x_d)
        self.output = estimator_outputs(self.state, self.gains)
        return self.output

    def phi(self) -> np.ndarray:
        return (self.output.g_vd - self.output.g1) / self.gains.gamma21

    def correction(self) -> np.ndarray:
        return projection_correction(self.output.g1, self.phi(), self.gains)
