"""
Scenario files.

A scenario is a TOML document with the sections [vehicle], [gains],
[analysis], [trajectory], [sim] and [initial]. Parsing validates every
field and turns the document into frozen dataclasses; unknown keys are
rejected so that typos never fall back to defaults silently.
"""

import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from .controller import AttitudeFilterForm, ControllerGains, RunMode, ThrustStrategy
from .dynamics import MixerConfig, MultirotorState, VehicleParams, quad_x_mixer
from .estimator import EstimatorGains
from .so3 import exp_so3
from .trajectory import BadParamsError, Trajectory, builtin

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

ESTIMATE = 'estimate'
REFERENCE = 'reference'

SECTIONS = ('vehicle', 'gains', 'analysis', 'trajectory', 'sim', 'initial')
TOP_LEVEL = ('name', 'description')

CONTROLLER_KEYS = ('k_alpha', 'alpha_x', 'alpha_f', 'k_R', 'k_Omega', 'gamma3', 'gamma4')
ESTIMATOR_KEYS = ('gamma1', 'gamma2', 'gamma21', 'eps0', 'h2')


class ConfigError(Exception):
    def __init__(self, path: Union[str, Path], key: str, reason: str):
        self.path = str(path)
        self.key = key
        self.reason = reason
        where = f" [{key}]" if key else ''
        super().__init__(f"{self.path}{where}: {reason}")


@dataclass(frozen=True)
class AnalysisSettings:
    c1: float
    L1: Optional[float] = None
    rho02: Optional[float] = None
    e_alpha_bar: Optional[float] = None
    g1_bound: str = 'projection'
    initial_filter_errors: Optional[Tuple[float, float, float, float]] = None


@dataclass(frozen=True)
class SimSettings:
    dt: float
    duration: float
    run_mode: RunMode = RunMode.ORACLE
    thrust_strategy: ThrustStrategy = ThrustStrategy.PROPOSED
    monitors: bool = True
    attitude_substeps: int = 1

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class InitialConditions:
    x0: Optional[np.ndarray] = None
    v0: Optional[np.ndarray] = None
    attitude: np.ndarray = field(default_factory=lambda: np.zeros(3))
    Omega0: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    path: str
    vehicle: VehicleParams
    gains: ControllerGains
    estimator: EstimatorGains
    analysis: AnalysisSettings
    trajectory_kind: str
    trajectory_params: Dict[str, Any]
    sim: SimSettings
    initial: InitialConditions
    trajectory: Trajectory = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        if self.trajectory is None:
            object.__setattr__(self, 'trajectory', builtin(self.trajectory_kind, self.trajectory_params))

    def initial_state(self) -> MultirotorState:
        """Initial plant state; x0/v0 default to the reference at t = 0."""
        x0 = self.initial.x0
        v0 = self.initial.v0
        if x0 is None:
            x0 = self.trajectory.sample(0.0).x_d
        if v0 is None:
            v0 = self.trajectory.oracle(0.0).v_d
        return MultirotorState(
            x=np.array(x0, dtype=float),
            v=np.array(v0, dtype=float),
            R=exp_so3(self.initial.attitude),
            Omega=np.array(self.initial.Omega0, dtype=float),
        )

    def scaled_filters(self, s: float, attitude_substeps: Optional[int] = None) -> 'ScenarioConfig':
        """gamma1, gamma2, gamma21, gamma3 scaled by s and gamma4 by s^2."""
        sim = self.sim
        if attitude_substeps is not None:
            sim = replace(sim, attitude_substeps=attitude_substeps)
        return replace(
            self,
            name=f"{self.name}-x{s:g}",
            gains=self.gains.scaled_filter(s),
            estimator=self.estimator.scaled(s),
            sim=sim,
            trajectory=self.trajectory,
        )


class _Section:
    """Key access that reports the offending key on error and tracks unused keys."""

    def __init__(self, path: str, name: str, data: Any):
        if not isinstance(data, Mapping):
            raise ConfigError(path, name, "must be a table")
        self.path = path
        self.name = name
        self.data = dict(data)
        self.used = set()

    def _key(self, key: str) -> str:
        return f"{self.name}.{key}"

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default: Any = None) -> Any:
        self.used.add(key)
        return self.data.get(key, default)

    def number(self, key: str, default: Optional[float] = None, positive: bool = False) -> float:
        if key not in self.data:
            if default is None:
                raise ConfigError(self.path, self._key(key), "missing required value")
            return default
        value = self.raw(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(self.path, self._key(key), f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(self.path, self._key(key), "must be finite")
        if positive and value <= 0.0:
            raise ConfigError(self.path, self._key(key), f"must be positive, got {value}")
        return value

    def number_or_estimate(self, key: str) -> Optional[float]:
        value = self.data.get(key, ESTIMATE)
        if value == ESTIMATE:
            self.used.add(key)
            return None
        return self.number(key, positive=True)

    def vector(self, key: str, length: int = 3, default: Any = None) -> Optional[np.ndarray]:
        if key not in self.data:
            if default is None:
                raise ConfigError(self.path, self._key(key), "missing required value")
            return np.array(default, dtype=float)
        value = self.raw(key)
        try:
            arr = np.array(value, dtype=float).reshape(-1)
        except (TypeError, ValueError):
            raise ConfigError(self.path, self._key(key), f"expected {length} numbers, got {value!r}")
        if arr.shape != (length,) or not np.all(np.isfinite(arr)):
            raise ConfigError(self.path, self._key(key), f"expected {length} finite numbers")
        return arr

    def choice(self, key: str, options, default: str) -> str:
        value = self.raw(key, default)
        allowed = [o.value if hasattr(o, 'value') else o for o in options]
        if value not in allowed:
            raise ConfigError(self.path, self._key(key), f"expected one of {allowed}, got {value!r}")
        return value

    def finish(self) -> None:
        unknown = sorted(set(self.data) - self.used)
        if unknown:
            raise ConfigError(self.path, self._key(unknown[0]), "unknown key")


def _parse_vehicle(sec: _Section) -> VehicleParams:
    m = sec.number('m', positive=True)
    g = sec.number('g', default=9.81, positive=True)
    J_raw = sec.raw('J')
    if J_raw is None:
        raise ConfigError(sec.path, 'vehicle.J', "missing required value")
    J = np.array(J_raw, dtype=float).reshape(-1) if _is_numeric_list(J_raw) else None
    if J is None or J.size not in (3, 9):
        raise ConfigError(sec.path, 'vehicle.J', "expected a diagonal of 3 or 9 values")
    J = np.diag(J) if J.size == 3 else J.reshape(3, 3)

    mixer = None
    if sec.has('mixer'):
        mixer = _parse_mixer(_Section(sec.path, 'vehicle.mixer', sec.raw('mixer')))
    try:
        return VehicleParams(m=m, J=J, g=g, mixer=mixer)
    except ValueError as exc:
        raise ConfigError(sec.path, 'vehicle', str(exc))


def _is_numeric_list(value: Any) -> bool:
    if not isinstance(value, list):
        return False
    flat = [v for row in value for v in (row if isinstance(row, list) else [row])]
    return all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in flat)


def _parse_mixer(sec: _Section) -> MixerConfig:
    if sec.has('gamma'):
        gamma = sec.raw('gamma')
        sec.finish()
        try:
            return MixerConfig(np.array(gamma, dtype=float))
        except (TypeError, ValueError) as exc:
            raise ConfigError(sec.path, 'vehicle.mixer.gamma', str(exc))
    sec.choice('kind', ('quad_x',), 'quad_x')
    mixer = quad_x_mixer(
        arm=sec.number('arm', default=math.sqrt(2.0), positive=True),
        thrust_coeff=sec.number('thrust_coeff', default=1.0, positive=True),
        moment_coeff=sec.number('moment_coeff', default=1.0, positive=True),
    )
    sec.finish()
    return mixer


def _parse_gains(sec: _Section) -> Tuple[ControllerGains, EstimatorGains]:
    values = {k: sec.number(k, positive=True) for k in CONTROLLER_KEYS}
    values['delta_A'] = sec.number('delta_A', default=0.1, positive=True)
    values['attitude_filter'] = AttitudeFilterForm(
        sec.choice('attitude_filter', AttitudeFilterForm, AttitudeFilterForm.PRINTED.value)
    )
    est = {k: sec.number(k, positive=True) for k in ESTIMATOR_KEYS}
    try:
        gains = ControllerGains(**values)
        estimator = EstimatorGains(**est)
    except ValueError as exc:
        raise ConfigError(sec.path, 'gains', str(exc))
    if gains.attitude_filter == AttitudeFilterForm.PRINTED and gains.gamma4 >= 2.0 * gains.gamma3:
        logger.warning(
            f"{sec.path}: attitude filter as printed is unstable for gamma4 >= 2 gamma3 "
            f"({gains.gamma4} >= {2.0 * gains.gamma3})"
        )
    return gains, estimator


def _parse_analysis(sec: _Section) -> AnalysisSettings:
    errors_raw = sec.data.get('initial_filter_errors', ESTIMATE)
    if errors_raw == ESTIMATE:
        sec.used.add('initial_filter_errors')
        errors = None
    else:
        arr = sec.vector('initial_filter_errors', length=4)
        if np.any(arr < 0.0):
            raise ConfigError(sec.path, 'analysis.initial_filter_errors', "must be >= 0")
        errors = tuple(float(v) for v in arr)
    e_alpha_bar = sec.number_or_estimate('e_alpha_bar')
    return AnalysisSettings(
        c1=sec.number('c1', positive=True),
        L1=sec.number_or_estimate('L1'),
        rho02=sec.number_or_estimate('rho02'),
        e_alpha_bar=e_alpha_bar,
        g1_bound=sec.choice('g1_bound', ('projection', 'nominal'), 'projection'),
        initial_filter_errors=errors,
    )


def _parse_sim(sec: _Section) -> SimSettings:
    dt = sec.number('dt', positive=True)
    duration = sec.number('duration', positive=True)
    if duration <= dt:
        raise ConfigError(sec.path, 'sim.duration', f"must exceed dt ({duration} <= {dt})")
    monitors = sec.raw('monitors', True)
    if isinstance(monitors, str) and monitors in ('on', 'off'):
        monitors = monitors == 'on'
    if not isinstance(monitors, bool):
        raise ConfigError(sec.path, 'sim.monitors', f"expected on/off or a boolean, got {monitors!r}")
    substeps = sec.raw('attitude_substeps', 1)
    if isinstance(substeps, bool) or not isinstance(substeps, int) or substeps < 1:
        raise ConfigError(sec.path, 'sim.attitude_substeps', "expected an integer >= 1")
    return SimSettings(
        dt=dt,
        duration=duration,
        run_mode=RunMode(sec.choice('run_mode', RunMode, RunMode.ORACLE.value)),
        thrust_strategy=ThrustStrategy(
            sec.choice('thrust_strategy', ThrustStrategy, ThrustStrategy.PROPOSED.value)
        ),
        monitors=monitors,
        attitude_substeps=substeps,
    )


def _parse_initial(sec: _Section) -> InitialConditions:
    def reference_or_vector(key):
        if sec.data.get(key, REFERENCE) == REFERENCE:
            sec.used.add(key)
            return None
        return sec.vector(key)

    return InitialConditions(
        x0=reference_or_vector('x0'),
        v0=reference_or_vector('v0'),
        attitude=sec.vector('attitude', default=(0.0, 0.0, 0.0)),
        Omega0=sec.vector('Omega0', default=(0.0, 0.0, 0.0)),
    )


def parse_scenario(data: Mapping, path: Union[str, Path] = '<scenario>') -> ScenarioConfig:
    path = str(path)
    unknown = sorted(set(data) - set(SECTIONS) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError(path, unknown[0], "unknown section")
    for name in SECTIONS:
        if name not in data and name not in ('analysis', 'initial'):
            raise ConfigError(path, name, "missing section")

    vehicle_sec = _Section(path, 'vehicle', data['vehicle'])
    vehicle = _parse_vehicle(vehicle_sec)
    vehicle_sec.used.add('mixer')
    vehicle_sec.finish()

    gains_sec = _Section(path, 'gains', data['gains'])
    gains, estimator = _parse_gains(gains_sec)
    gains_sec.finish()

    analysis_sec = _Section(path, 'analysis', data.get('analysis', {'c1': 1.0}))
    analysis = _parse_analysis(analysis_sec)
    analysis_sec.finish()

    traj = dict(data['trajectory'])
    kind = traj.pop('kind', None)
    if kind is None:
        raise ConfigError(path, 'trajectory.kind', "missing required value")
    try:
        trajectory = builtin(kind, traj)
    except BadParamsError as exc:
        raise ConfigError(path, 'trajectory', str(exc))

    sim_sec = _Section(path, 'sim', data['sim'])
    sim = _parse_sim(sim_sec)
    sim_sec.finish()

    initial_sec = _Section(path, 'initial', data.get('initial', {}))
    initial = _parse_initial(initial_sec)
    initial_sec.finish()

    name = data.get('name') or Path(path).stem
    scenario = ScenarioConfig(
        name=str(name), path=path, vehicle=vehicle, gains=gains, estimator=estimator,
        analysis=analysis, trajectory_kind=kind, trajectory_params=traj, sim=sim,
        initial=initial, trajectory=trajectory,
    )
    logger.debug(f"Parsed scenario {scenario.name!r} from {path}")
    return scenario


def loads_scenario(text: str, path: Union[str, Path] = '<string>') -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(path, '', f"invalid TOML: {exc}")
    return parse_scenario(data, path)


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(path, '', f"cannot read scenario: {exc.strerror or exc}")
    return loads_scenario(text, path)
