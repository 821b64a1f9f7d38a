"""
Certification services - build certificate inputs from a scenario, evaluate
the gain conditions and persist the verdict.
"""

import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import List, NamedTuple, Optional, Union

import numpy as np
from django.conf import settings

from flight.controller import AttitudeFilterState, GeometricController, PositionLoopState
from flight.scenario import ConfigError, ScenarioConfig

from .analysis import (
    CONDITIONS,
    CertificateInputs,
    CertificateReport,
    InitialFilterErrors,
    compute_constants,
    estimate_omega_c_bound,
    initial_filter_errors,
    lyapunov_eval,
)
from .models import GainCertificate

logger = logging.getLogger(__name__)

# placeholder e_alpha_bar while the required value is being computed
E_ALPHA_SEED = 1.0


class Certificate(NamedTuple):
    inputs: CertificateInputs
    report: CertificateReport


class CertificationService:
    """Turns a scenario into a gain certificate."""

    def filter_errors(self, scenario: ScenarioConfig) -> InitialFilterErrors:
        given = scenario.analysis.initial_filter_errors
        if given is not None:
            return InitialFilterErrors(*given)
        return initial_filter_errors(scenario.trajectory, scenario.estimator)

    def _omega_c_terms(self, scenario: ScenarioConfig, errors: InitialFilterErrors,
                       e_alpha_bar: float):
        analysis = scenario.analysis
        if analysis.L1 is not None and analysis.rho02 is not None:
            return analysis.L1, analysis.rho02
        try:
            estimate = estimate_omega_c_bound(
                scenario.vehicle, scenario.gains, scenario.estimator,
                scenario.trajectory.bounds, errors, e_alpha_bar,
            )
        except ValueError as exc:
            raise ConfigError(scenario.path, 'analysis.L1', f"cannot estimate: {exc}; give L1 and rho02")
        logger.info(f"Estimated Omega_c bound: L1={estimate.L1:.6g}, rho02={estimate.rho02:.6g}")
        L1 = analysis.L1 if analysis.L1 is not None else estimate.L1
        rho02 = analysis.rho02 if analysis.rho02 is not None else estimate.rho02
        return L1, rho02

    def initial_lyapunov(self, scenario: ScenarioConfig, ci: CertificateInputs) -> float:
        """V at t = 0, with the attitude filter started at R_c(0) and e_f = 0."""
        s0 = scenario.initial_state()
        samp = scenario.trajectory.sample(0.0)
        v_d = scenario.trajectory.oracle(0.0).v_d
        controller = GeometricController(
            scenario.vehicle, scenario.gains, scenario.estimator,
            strategy=scenario.sim.thrust_strategy,
        )
        step = controller.compute(s0, samp, v_d)
        afs = AttitudeFilterState(R_d=step.R_c.copy(), Omega_d=np.zeros(3))
        values = lyapunov_eval(s0, afs, PositionLoopState.zero(), step.R_c, samp, ci, v_d)
        return values.V

    def build_inputs(self, scenario: ScenarioConfig) -> CertificateInputs:
        bounds = scenario.trajectory.bounds
        if bounds is None:
            raise ConfigError(
                scenario.path, 'trajectory.kind',
                f"'{scenario.trajectory_kind}' reference has no derivative bounds and cannot be certified",
            )
        analysis = scenario.analysis
        errors = self.filter_errors(scenario)
        seed = analysis.e_alpha_bar if analysis.e_alpha_bar is not None else E_ALPHA_SEED
        L1, rho02 = self._omega_c_terms(scenario, errors, seed)

        try:
            ci = CertificateInputs(
                vehicle=scenario.vehicle, gains=scenario.gains, estimator=scenario.estimator,
                bounds=bounds, c1=analysis.c1, L1=L1, rho02=rho02, e_alpha_bar=seed,
                e_gx0=errors.e_gx0, e_xdd0=errors.e_xdd0, e_gv0=errors.e_gv0, e_g10=errors.e_g10,
                g1_bound=analysis.g1_bound,
            )
        except ValueError as exc:
            raise ConfigError(scenario.path, 'analysis', str(exc))
        return replace(ci, V0=self.initial_lyapunov(scenario, ci))

    def certify(self, scenario: ScenarioConfig) -> Certificate:
        analysis = scenario.analysis
        ci = self.build_inputs(scenario)
        report = compute_constants(ci)
        assumed = analysis.e_alpha_bar is None and report.e_alpha_required is not None
        if assumed:
            # the domain condition then holds by construction and is reported as assumed
            ci = replace(ci, e_alpha_bar=report.e_alpha_required)
            report = compute_constants(ci)
            logger.warning(f"e_alpha_bar not given for {scenario.name!r}; assuming {ci.e_alpha_bar:.6g}")
        source = 'scenario' if analysis.L1 is not None and analysis.rho02 is not None else 'estimate'
        report = replace(report, omega_c_source=source, e_alpha_bar_assumed=assumed)

        if report.passed:
            logger.info(f"Certificate for {scenario.name!r} passed, D/lambda_V={report.ultimate_bound:.6g}")
        else:
            logger.warning(f"Certificate for {scenario.name!r} failed: {', '.join(report.failing)}")
        return Certificate(ci, report)

    def record(self, scenario: ScenarioConfig, report: CertificateReport) -> GainCertificate:
        cert = GainCertificate.objects.create(
            scenario=scenario.name,
            config_path=scenario.path,
            passed=report.passed,
            lambda_V=report.lambda_V,
            D=report.D,
            ultimate_bound=report.ultimate_bound,
            failing=','.join(report.failing),
            report=_json_safe(report.as_dict()),
        )
        logger.info(f"Recorded certificate {cert.pk} for {scenario.name!r}")
        return cert


def _json_safe(data):
    if isinstance(data, dict):
        return {k: _json_safe(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_json_safe(v) for v in data]
    if isinstance(data, float) and not math.isfinite(data):
        return None
    return data


def _format_value(value, float_format: str) -> str:
    if value is None:
        return 'unbounded'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return float_format % value
    return str(value)


def report_lines(report: CertificateReport, float_format: Optional[str] = None) -> List[str]:
    """Key-value lines: constants first, then one line per gain condition."""
    float_format = float_format or settings.WORKBENCH_FLOAT_FORMAT
    lines = []
    for key, value in report.as_dict().items():
        if key in ('condition_flags', 'failing'):
            continue
        lines.append(f"{key} = {_format_value(value, float_format)}")
    for name, ok in report.condition_flags.items():
        verdict = 'pass' if ok else 'FAIL'
        if name == 'e_alpha_domain' and ok and report.e_alpha_bar_assumed:
            verdict = 'assumed'
        lines.append(f"condition.{name} = {verdict}  # {CONDITIONS[name]}")
    return lines


def write_report(lines: List[str], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    logger.info(f"Wrote report to {path}")
    return path
