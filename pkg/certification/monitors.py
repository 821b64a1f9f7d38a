"""
In-loop audit of the closed-loop bounds.

Each step the monitor compares what the run actually does against the
constants of a certificate: virtual-input bounds, thrust mismatch,
filter-error bounds, projection properties, the reference-acceleration
and Omega_c envelopes the certificate assumes, Lyapunov decrease outside
the ultimate bound and the attitude sub-level sets.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from flight.estimator import EstimatorOutput
from flight.trajectory import OracleSample

from .analysis import CertificateInputs, CertificateReport, LyapunovValues

logger = logging.getLogger(__name__)

SLACK_TOL = 1e-6
DECREASE_BAND = 0.05

MONITOR_IDS = (
    'fd_upper',
    'fd_lower',
    'thrust_mismatch',
    'e_gx',
    'e_xdd',
    'e_gv',
    'e_g1',
    'projection_ball',
    'projection_passivity',
    'reference_acceleration',
    'omega_c_envelope',
    'thrust_nonnegative',
    'psi_R_Rd',
    'psi_Rd_Rc',
    'lyapunov_decrease',
)


class MonitorResult(NamedTuple):
    id: str
    lhs: float
    rhs: float
    satisfied: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass
class MonitorContext:
    t: float
    f_d: np.ndarray
    f: float
    R: np.ndarray
    R_c: np.ndarray
    e_Rd_norm: float
    e_Rdc_norm: float
    psi_R_Rd: float
    psi_Rd_Rc: float
    estimate: EstimatorOutput
    correction: np.ndarray
    oracle: OracleSample
    lyapunov: LyapunovValues
    # |e_alpha| against the true reference velocity
    e_alpha_norm: float = 0.0
    # body rate of R_c over the last step; None on the first sample
    Omega_c: Optional[np.ndarray] = None


@dataclass
class MonitorSummary:
    min_slack: float = math.inf
    violations: int = 0
    evaluations: int = 0


def _le(monitor_id: str, lhs: float, rhs: float, slack: float) -> MonitorResult:
    return MonitorResult(monitor_id, lhs, rhs, lhs <= rhs + slack)


def omega_c_envelope(ci: CertificateInputs, e_alpha_norm: float) -> float:
    """sqrt(L1^2 |e_alpha|^2 + rho02^2), the Omega_c bound the certificate is built on."""
    return math.sqrt(ci.L1 ** 2 * e_alpha_norm ** 2 + ci.rho02 ** 2)


def monitor_step(ctx: MonitorContext, report: CertificateReport, ci: CertificateInputs,
                 slack: float = SLACK_TOL) -> List[MonitorResult]:
    """Per-step inequalities that need no history."""
    gamma1 = ci.estimator.gamma1
    est, o = ctx.estimate, ctx.oracle

    fd_norm = float(np.linalg.norm(ctx.f_d))
    mismatch = float(np.linalg.norm(ctx.f_d - ctx.f * ctx.R[:, 2]))

    e_gx = o.v_d - est.g_xd
    g_xd_rate = e_gx / gamma1
    e_xdd = o.a_d - g_xd_rate
    e_gv = g_xd_rate - est.g_vd
    e_g1 = o.a_d - est.g1

    ball = ci.estimator.h2 ** 2 * (1.0 + ci.estimator.eps0)

    results = [
        _le('fd_upper', fd_norm, report.alpha1, slack),
        _le('fd_lower', report.alpha2, fd_norm, slack),
        _le('thrust_mismatch', mismatch, 2.0 * report.alpha1 * (ctx.e_Rdc_norm + ctx.e_Rd_norm), slack),
        _le('e_gx', float(np.linalg.norm(e_gx)), report.alpha3, slack),
        _le('e_xdd', float(np.linalg.norm(e_xdd)), report.alpha4, slack),
        _le('e_gv', float(np.linalg.norm(e_gv)), report.alpha5, slack),
        _le('e_g1', float(np.linalg.norm(e_g1)), report.alpha6, slack),
        _le('projection_ball', float(est.g1 @ est.g1), ball, slack),
        _le('projection_passivity', float(e_g1 @ ctx.correction), 0.0, slack),
        _le('reference_acceleration', float(np.linalg.norm(o.a_d)), ci.estimator.h2, slack),
    ]
    if ctx.Omega_c is not None:
        results.append(_le('omega_c_envelope', float(np.linalg.norm(ctx.Omega_c)),
                           omega_c_envelope(ci, ctx.e_alpha_norm), slack))
    results += [
        _le('thrust_nonnegative', -ctx.f, 0.0, 0.0),
        MonitorResult('psi_R_Rd', ctx.psi_R_Rd, 2.0, ctx.psi_R_Rd < 2.0),
        MonitorResult('psi_Rd_Rc', ctx.psi_Rd_Rc, 2.0, ctx.psi_Rd_Rc < 2.0),
    ]
    return results


class AuditMonitor:
    """
    Stateful wrapper that also checks the Lyapunov decrease by central
    differences (one step late). A monitor fails as soon as it records a
    violation.
    """

    def __init__(self, report: CertificateReport, ci: CertificateInputs, dt: float,
                 slack: float = SLACK_TOL, band: float = DECREASE_BAND):
        self.report = report
        self.ci = ci
        self.dt = dt
        self.slack = slack
        self.band = band
        self.summary: Dict[str, MonitorSummary] = OrderedDict((k, MonitorSummary()) for k in MONITOR_IDS)
        self.violation_count = 0
        self._history: List[LyapunovValues] = []

    @property
    def decrease_threshold(self) -> Optional[float]:
        if self.report.ultimate_bound is None:
            return None
        return (1.0 + self.band) * self.report.ultimate_bound

    def _record(self, results: List[MonitorResult], t: float) -> None:
        for r in results:
            entry = self.summary[r.id]
            entry.evaluations += 1
            entry.min_slack = min(entry.min_slack, r.slack)
            if not r.satisfied:
                entry.violations += 1
                self.violation_count += 1
                logger.debug(f"Monitor {r.id} violated at t={t:.6g}: {r.lhs:.9g} > {r.rhs:.9g}")

    def _decrease_check(self) -> Optional[MonitorResult]:
        threshold = self.decrease_threshold
        if threshold is None or len(self._history) < 3:
            return None
        before, middle, after = self._history[-3:]
        if middle.e_norm_sq <= threshold:
            return None
        V_dot = (after.V - before.V) / (2.0 * self.dt)
        return MonitorResult('lyapunov_decrease', V_dot, 0.0, V_dot < 0.0)

    def observe(self, ctx: MonitorContext) -> List[MonitorResult]:
        results = monitor_step(ctx, self.report, self.ci, self.slack)

        self._history.append(ctx.lyapunov)
        if len(self._history) > 3:
            self._history.pop(0)
        decrease = self._decrease_check()
        if decrease is not None:
            results.append(decrease)

        self._record(results, ctx.t)
        return results

    def min_slacks(self) -> Dict[str, float]:
        return {k: v.min_slack for k, v in self.summary.items() if v.evaluations}

    def failed(self) -> List[str]:
        return [k for k, v in self.summary.items() if v.violations]
