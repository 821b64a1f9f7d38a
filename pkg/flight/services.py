"""
Simulation services - the closed-loop run of one scenario, its summary and
the run registry.
"""

import logging
import math
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from certification.analysis import lyapunov_eval, omega_c_diagnostic
from certification.monitors import AuditMonitor, MonitorContext
from certification.services import Certificate, CertificationService

from .controller import (
    GeometricController,
    HeadingSingularError,
    ZeroThrustDirectionError,
)
from .dynamics import NegativeThrustError, NonFiniteError, allocate_rotors, step
from .models import SimulationRun
from .scenario import ScenarioConfig
from .so3 import NearAntipodalError, config_error
from .telemetry import TelemetryWriter

logger = logging.getLogger(__name__)

# numerical failures that end a run early
ABORT_ERRORS = (
    NonFiniteError,
    NearAntipodalError,
    NegativeThrustError,
    HeadingSingularError,
    ZeroThrustDirectionError,
)


@dataclass
class RunSummary:
    scenario: str
    steps: int = 0
    final_time: float = 0.0
    final_ex_norm: float = math.nan
    max_ex_norm: float = 0.0
    mean_ex_norm_tail: float = math.nan
    max_psi_R_Rd: float = 0.0
    max_psi_Rd_Rc: float = 0.0
    min_thrust: float = math.inf
    max_e_norm_sq_tail: float = 0.0
    last_above_bound: Optional[float] = None
    infeasible_allocations: int = 0
    monitors_enabled: bool = False
    violations: int = 0
    violations_by_monitor: Dict[str, int] = field(default_factory=dict)
    min_slacks: Dict[str, float] = field(default_factory=dict)
    omega_c_sup: float = 0.0

    def lines(self, float_format: str = '%.6g'):
        yield f"scenario = {self.scenario}"
        yield f"steps = {self.steps}"
        yield f"final_time = {float_format % self.final_time}"
        yield f"final_ex_norm = {float_format % self.final_ex_norm}"
        yield f"max_ex_norm = {float_format % self.max_ex_norm}"
        yield f"mean_ex_norm_tail = {float_format % self.mean_ex_norm_tail}"
        yield f"max_psi_R_Rd = {float_format % self.max_psi_R_Rd}"
        yield f"max_psi_Rd_Rc = {float_format % self.max_psi_Rd_Rc}"
        yield f"min_thrust = {float_format % self.min_thrust}"
        yield f"infeasible_allocations = {self.infeasible_allocations}"
        yield f"omega_c_sup = {float_format % self.omega_c_sup}"
        yield f"monitors = {'on' if self.monitors_enabled else 'off'}"
        yield f"violations = {self.violations}"
        for monitor_id, count in self.violations_by_monitor.items():
            if count:
                yield f"violations.{monitor_id} = {count}"


@dataclass
class RunResult:
    summary: RunSummary
    certificate: Optional[Certificate] = None
    monitor: Optional[AuditMonitor] = None
    error: Optional[Exception] = None

    @property
    def aborted(self) -> bool:
        return self.error is not None


class SimulationService:
    """Runs the closed loop of a scenario step by step."""

    def _certificate(self, scenario: ScenarioConfig) -> Optional[Certificate]:
        if not scenario.trajectory.smooth:
            return None
        return CertificationService().certify(scenario)

    def run(self, scenario: ScenarioConfig, telemetry_path: Optional[Union[str, Path]] = None,
            force_monitors: bool = False) -> RunResult:
        sim = scenario.sim
        summary = RunSummary(scenario=scenario.name)

        certificate = self._certificate(scenario)
        monitors_on = sim.monitors or force_monitors
        if certificate is None and monitors_on:
            logger.warning(f"Reference '{scenario.trajectory_kind}' is not smooth; monitors disabled")
            monitors_on = False
        if certificate is not None and not certificate.report.passed:
            logger.warning(f"Gain conditions not met ({', '.join(certificate.report.failing)}); running anyway")

        monitor = AuditMonitor(certificate.report, certificate.inputs, sim.dt) if monitors_on else None
        summary.monitors_enabled = monitors_on
        result = RunResult(summary=summary, certificate=certificate, monitor=monitor)

        logger.info(
            f"Simulating {scenario.name!r}: {sim.steps} steps of {sim.dt:g} s, {sim.run_mode.value} mode, "
            f"{sim.thrust_strategy.value} thrust, monitors {'on' if monitors_on else 'off'}"
        )
        writer = TelemetryWriter(telemetry_path) if telemetry_path else nullcontext()
        with writer:
            try:
                self._loop(scenario, certificate, monitor, summary,
                           writer if telemetry_path else None)
            except ABORT_ERRORS as exc:
                logger.error(f"Run {scenario.name!r} aborted at t={summary.final_time:.6g}: {exc}")
                result.error = exc

        if monitor is not None:
            summary.violations = monitor.violation_count
            summary.violations_by_monitor = {k: v.violations for k, v in monitor.summary.items()}
            summary.min_slacks = monitor.min_slacks()

        logger.info(
            f"Run {scenario.name!r} finished: final |e_x|={summary.final_ex_norm:.3e}, "
            f"violations={summary.violations}"
        )
        return result

    def _loop(self, scenario: ScenarioConfig, certificate: Optional[Certificate],
              monitor: Optional[AuditMonitor], summary: RunSummary,
              writer: Optional[TelemetryWriter]) -> None:
        sim = scenario.sim
        traj = scenario.trajectory
        vehicle = scenario.vehicle
        ci = certificate.inputs if certificate else None
        bound = math.nan
        if certificate is not None and certificate.report.ultimate_bound is not None:
            bound = certificate.report.ultimate_bound

        controller = GeometricController(
            vehicle, scenario.gains, scenario.estimator,
            strategy=sim.thrust_strategy, run_mode=sim.run_mode,
            attitude_substeps=sim.attitude_substeps,
        )
        n = sim.steps
        tail_start = 0.5 * n * sim.dt
        tail_sum, tail_count = 0.0, 0
        s = scenario.initial_state()
        samp = traj.sample(0.0)
        R_c_prev = None

        for k in range(n + 1):
            t = k * sim.dt
            oracle = traj.oracle(t)
            ctl = controller.compute(s, samp, oracle.v_d)
            afs = controller.attitude_filter

            e_Rd = config_error(s.R, afs.R_d)
            e_Rdc = config_error(afs.R_d, ctl.R_c)
            e_Omega = s.Omega - s.R.T @ (afs.R_d @ afs.Omega_d)
            ex_norm = float(np.linalg.norm(ctl.e_x))

            Omega_c = None
            if R_c_prev is not None:
                Omega_c = omega_c_diagnostic(R_c_prev, ctl.R_c, sim.dt)
                summary.omega_c_sup = max(summary.omega_c_sup, float(np.linalg.norm(Omega_c)))
            R_c_prev = ctl.R_c

            lyap = None
            if ci is not None:
                # e_alpha measured against the true reference velocity in both run modes
                lyap = lyapunov_eval(s, afs, controller.position_loop, ctl.R_c, samp, ci, oracle.v_d)
            if monitor is not None:
                monitor.observe(MonitorContext(
                    t=t, f_d=ctl.f_d, f=ctl.u.f, R=s.R, R_c=ctl.R_c,
                    e_Rd_norm=float(np.linalg.norm(e_Rd.e_R)),
                    e_Rdc_norm=float(np.linalg.norm(e_Rdc.e_R)),
                    psi_R_Rd=e_Rd.psi, psi_Rd_Rc=e_Rdc.psi,
                    estimate=ctl.estimate, correction=controller.estimator.correction(),
                    oracle=oracle, lyapunov=lyap,
                    e_alpha_norm=float(np.linalg.norm(ctl.e_alpha + ctl.v_d_used - oracle.v_d)),
                    Omega_c=Omega_c,
                ))

            if vehicle.mixer is not None and allocate_rotors(ctl.u, vehicle.mixer).infeasible:
                summary.infeasible_allocations += 1

            summary.steps = k
            summary.final_time = t
            summary.final_ex_norm = ex_norm
            summary.max_ex_norm = max(summary.max_ex_norm, ex_norm)
            summary.max_psi_R_Rd = max(summary.max_psi_R_Rd, e_Rd.psi)
            summary.max_psi_Rd_Rc = max(summary.max_psi_Rd_Rc, e_Rdc.psi)
            summary.min_thrust = min(summary.min_thrust, ctl.u.f)
            if t >= tail_start:
                tail_sum += ex_norm
                tail_count += 1
                summary.mean_ex_norm_tail = tail_sum / tail_count
            if lyap is not None:
                if lyap.e_norm_sq > bound:
                    summary.last_above_bound = t
                if t >= tail_start:
                    summary.max_e_norm_sq_tail = max(summary.max_e_norm_sq_tail, lyap.e_norm_sq)

            if writer is not None:
                if lyap is not None:
                    lyap_cols = [lyap.V2, lyap.V3, lyap.V4, lyap.V, lyap.e_norm_sq]
                else:
                    lyap_cols = [math.nan] * 5
                writer.write(
                    [t, *s.x, *s.v, *samp.x_d, ex_norm, float(np.linalg.norm(ctl.e_alpha)),
                     *ctl.e_f, ctl.u.f, *ctl.u.M, e_Rd.psi, e_Rdc.psi,
                     float(np.linalg.norm(e_Omega)), *ctl.estimate.g1,
                     *lyap_cols, bound, monitor.violation_count if monitor else 0]
                )

            if k == n:
                break
            s = step(s, ctl.u, vehicle, sim.dt)
            samp = traj.sample((k + 1) * sim.dt)
            controller.advance(samp, sim.dt)

    def record(self, scenario: ScenarioConfig, result: RunResult, command: str,
               exit_code: int, output_path: Union[str, Path, None] = None) -> SimulationRun:
        summary = result.summary
        run = SimulationRun.objects.create(
            scenario=scenario.name,
            config_path=scenario.path,
            command=command,
            run_mode=scenario.sim.run_mode.value,
            thrust_strategy=scenario.sim.thrust_strategy.value,
            dt=scenario.sim.dt,
            duration=scenario.sim.duration,
            steps=summary.steps,
            final_ex_norm=_finite_or_none(summary.final_ex_norm),
            max_psi_R_Rd=summary.max_psi_R_Rd,
            max_psi_Rd_Rc=summary.max_psi_Rd_Rc,
            violations=summary.violations,
            exit_code=exit_code,
            output_path=str(output_path or ''),
        )
        logger.info(f"Recorded run {run.pk} ({command}) for {scenario.name!r}")
        return run


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None
