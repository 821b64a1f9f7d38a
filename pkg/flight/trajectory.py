"""
Reference trajectory providers.

The controller only ever sees a TrajectorySample (desired position and
heading). True derivatives are served by a separate ``oracle`` accessor that
the audit monitors and the oracle run mode use.
"""

import logging
import math
from dataclasses import dataclass, fields
from typing import Dict, Mapping, NamedTuple, Optional, Sequence, Tuple, Type

import numpy as np
from scipy.optimize import minimize_scalar

logger = logging.getLogger(__name__)

LEMNISCATE_GRID = 4096


class BadParamsError(ValueError):
    def __init__(self, kind: str, reason: str):
        self.kind = kind
        self.reason = reason
        super().__init__(f"Bad parameters for {kind!r} trajectory: {reason}")


class TrajectorySample(NamedTuple):
    t: float
    x_d: np.ndarray
    x_Bd: np.ndarray


class OracleSample(NamedTuple):
    t: float
    v_d: np.ndarray
    a_d: np.ndarray
    j_d: np.ndarray
    s_d: np.ndarray
    x_Bd_dot: np.ndarray
    x_Bd_ddot: np.ndarray


@dataclass(frozen=True)
class TrajectoryBounds:
    h1: float
    h2: float
    h3: float
    h4: float
    h5: float
    h6: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"Trajectory bound {f.name} must be finite and >= 0, got {value}")

    def as_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _vector(kind: str, name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise BadParamsError(kind, f"{name} must be a finite 3-vector")
    return arr


def _scalar(kind: str, name: str, value, positive: bool = False) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise BadParamsError(kind, f"{name} must be a number")
    if not math.isfinite(value):
        raise BadParamsError(kind, f"{name} must be finite")
    if positive and value <= 0.0:
        raise BadParamsError(kind, f"{name} must be positive")
    return value


class Trajectory:
    """Base provider: heading psi(t) = psi0 + psi_rate * t, position from subclasses."""

    kind = 'abstract'
    smooth = True

    def __init__(self, psi0: float = 0.0, psi_rate: float = 0.0):
        self.psi0 = _scalar(self.kind, 'psi0', psi0)
        self.psi_rate = _scalar(self.kind, 'psi_rate', psi_rate)

    def position_derivatives(self, t: float) -> Tuple[np.ndarray, ...]:
        """x_d and its first four time derivatives at t."""
        raise NotImplementedError

    @property
    def bounds(self) -> Optional[TrajectoryBounds]:
        raise NotImplementedError

    def _heading(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        psi = self.psi0 + self.psi_rate * t
        c, s = math.cos(psi), math.sin(psi)
        w = self.psi_rate
        return (
            np.array([c, s, 0.0]),
            w * np.array([-s, c, 0.0]),
            -w * w * np.array([c, s, 0.0]),
        )

    def sample(self, t: float) -> TrajectorySample:
        if t < 0.0:
            raise ValueError(f"Trajectory time must be >= 0, got {t}")
        x_d = self.position_derivatives(t)[0]
        x_Bd, _, _ = self._heading(t)
        return TrajectorySample(t=t, x_d=x_d, x_Bd=x_Bd)

    def oracle(self, t: float) -> OracleSample:
        if t < 0.0:
            raise ValueError(f"Trajectory time must be >= 0, got {t}")
        _, v_d, a_d, j_d, s_d = self.position_derivatives(t)
        _, x_Bd_dot, x_Bd_ddot = self._heading(t)
        return OracleSample(
            t=t, v_d=v_d, a_d=a_d, j_d=j_d, s_d=s_d,
            x_Bd_dot=x_Bd_dot, x_Bd_ddot=x_Bd_ddot,
        )

    def heading_bounds(self) -> Tuple[float, float]:
        w = abs(self.psi_rate)
        return w, w * w

    def __repr__(self):
        return f"<{type(self).__name__} psi0={self.psi0} psi_rate={self.psi_rate}>"


class Hover(Trajectory):
    kind = 'hover'

    def __init__(self, position: Sequence[float] = (0.0, 0.0, 0.0), psi0: float = 0.0,
                 psi_rate: float = 0.0):
        super().__init__(psi0, psi_rate)
        self.position = _vector(self.kind, 'position', position)

    def position_derivatives(self, t):
        zero = np.zeros(3)
        return self.position.copy(), zero, zero.copy(), zero.copy(), zero.copy()

    @property
    def bounds(self):
        h5, h6 = self.heading_bounds()
        return TrajectoryBounds(0.0, 0.0, 0.0, 0.0, h5, h6)


class Circle(Trajectory):
    """Horizontal circle of radius r at angular rate omega; heading follows the phase by default."""

    kind = 'circle'

    def __init__(self, radius: float, omega: float, center: Sequence[float] = (0.0, 0.0, 0.0),
                 psi0: float = 0.0, psi_rate: Optional[float] = None):
        self.radius = _scalar(self.kind, 'radius', radius, positive=True)
        self.omega = _scalar(self.kind, 'omega', omega)
        if self.omega == 0.0:
            raise BadParamsError(self.kind, "omega must be non-zero")
        super().__init__(psi0, self.omega if psi_rate is None else psi_rate)
        self.center = _vector(self.kind, 'center', center)

    def position_derivatives(self, t):
        phase = self.omega * t
        out = []
        for n in range(5):
            a = phase + n * math.pi / 2.0
            scale = self.radius * self.omega ** n
            out.append(np.array([scale * math.cos(a), scale * math.sin(a), 0.0]))
        out[0] = out[0] + self.center
        return tuple(out)

    @property
    def bounds(self):
        r, w = self.radius, abs(self.omega)
        h5, h6 = self.heading_bounds()
        return TrajectoryBounds(r * w, r * w ** 2, r * w ** 3, r * w ** 4, h5, h6)


class Lemniscate(Trajectory):
    """Figure-eight x = a sin(wt), y = (a/2) sin(2wt) in the horizontal plane."""

    kind = 'lemniscate'

    def __init__(self, a: float, omega: float, center: Sequence[float] = (0.0, 0.0, 0.0),
                 psi0: float = 0.0, psi_rate: float = 0.0):
        super().__init__(psi0, psi_rate)
        self.a = _scalar(self.kind, 'a', a, positive=True)
        self.omega = _scalar(self.kind, 'omega', omega)
        if self.omega == 0.0:
            raise BadParamsError(self.kind, "omega must be non-zero")
        self.center = _vector(self.kind, 'center', center)
        self._bounds = self._derivative_bounds()

    def _derivative(self, t: float, n: int) -> np.ndarray:
        w = self.omega
        shift = n * math.pi / 2.0
        return np.array([
            self.a * w ** n * math.sin(w * t + shift),
            0.5 * self.a * (2.0 * w) ** n * math.sin(2.0 * w * t + shift),
            0.0,
        ])

    def position_derivatives(self, t):
        out = [self._derivative(t, n) for n in range(5)]
        out[0] = out[0] + self.center
        return tuple(out)

    def _derivative_bounds(self) -> TrajectoryBounds:
        period = 2.0 * math.pi / abs(self.omega)
        grid = np.linspace(0.0, period, LEMNISCATE_GRID, endpoint=False)
        spacing = grid[1] - grid[0]
        peaks = []
        for n in range(1, 5):
            norms = np.array([np.linalg.norm(self._derivative(t, n)) for t in grid])
            k = int(np.argmax(norms))
            refined = minimize_scalar(
                lambda t: -np.linalg.norm(self._derivative(t, n)),
                bounds=(grid[k] - spacing, grid[k] + spacing),
                method='bounded',
                options={'xatol': 1e-12},
            )
            peaks.append(max(float(norms[k]), float(-refined.fun)))
        h5, h6 = self.heading_bounds()
        logger.debug(f"Lemniscate a={self.a} omega={self.omega} bounds h1..h4={peaks}")
        return TrajectoryBounds(*peaks, h5, h6)

    @property
    def bounds(self):
        return self._bounds


class StepReference(Trajectory):
    """Piecewise-constant position jump; sampleable but without derivative bounds."""

    kind = 'step'
    smooth = False

    def __init__(self, start: Sequence[float] = (0.0, 0.0, 0.0),
                 end: Sequence[float] = (1.0, 0.0, 0.0), t_step: float = 1.0,
                 psi0: float = 0.0, psi_rate: float = 0.0):
        super().__init__(psi0, psi_rate)
        self.start = _vector(self.kind, 'start', start)
        self.end = _vector(self.kind, 'end', end)
        self.t_step = _scalar(self.kind, 't_step', t_step)
        if self.t_step < 0.0:
            raise BadParamsError(self.kind, "t_step must be >= 0")

    def position_derivatives(self, t):
        x = self.start if t < self.t_step else self.end
        zero = np.zeros(3)
        return x.copy(), zero, zero.copy(), zero.copy(), zero.copy()

    @property
    def bounds(self):
        return None


PROVIDERS: Dict[str, Type[Trajectory]] = {
    cls.kind: cls for cls in (Hover, Circle, Lemniscate, StepReference)
}


def builtin(kind: str, params: Optional[Mapping] = None) -> Trajectory:
    try:
        cls = PROVIDERS[kind]
    except KeyError:
        raise BadParamsError(kind, f"unknown kind, expected one of {sorted(PROVIDERS)}")
    try:
        return cls(**dict(params or {}))
    except TypeError as exc:
        raise BadParamsError(kind, str(exc))
