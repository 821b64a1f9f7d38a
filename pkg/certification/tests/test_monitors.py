from dataclasses import replace
from pathlib import Path

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from certification.analysis import LyapunovValues
from certification.monitors import MONITOR_IDS, AuditMonitor, MonitorContext, monitor_step
from certification.services import CertificationService
from flight.estimator import EstimatorOutput
from flight.scenario import load_scenario
from flight.so3 import rotation_x

ZERO_LYAPUNOV = LyapunovValues(V2=0.0, V2_J=0.0, V3=0.0, V4=0.0, V=0.0, e_norm_sq=0.0)


def hover_context(**changes):
    zero = np.zeros(3)
    scenario = load_scenario(Path(settings.WORKBENCH_SCENARIO_DIR) / 'hover.toml')
    mg = scenario.vehicle.m * scenario.vehicle.g
    values = dict(
        t=0.0, f_d=np.array([0.0, 0.0, mg]), f=mg, R=np.eye(3), R_c=np.eye(3),
        e_Rd_norm=0.0, e_Rdc_norm=0.0, psi_R_Rd=0.0, psi_Rd_Rc=0.0,
        estimate=EstimatorOutput(zero, zero, zero), correction=zero,
        oracle=scenario.trajectory.oracle(0.0),
        lyapunov=ZERO_LYAPUNOV, e_alpha_norm=0.0, Omega_c=zero,
    )
    values.update(changes)
    return MonitorContext(**values)


class MonitorStepTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        scenario = load_scenario(Path(settings.WORKBENCH_SCENARIO_DIR) / 'hover.toml')
        cls.certificate = CertificationService().certify(scenario)

    def evaluate(self, ctx):
        results = monitor_step(ctx, self.certificate.report, self.certificate.inputs)
        return {r.id: r for r in results}

    def test_equilibrium_satisfies_everything(self):
        results = self.evaluate(hover_context())
        self.assertEqual(set(results), set(MONITOR_IDS) - {'lyapunov_decrease'})
        for r in results.values():
            self.assertTrue(r.satisfied, r.id)

    def test_negative_thrust(self):
        results = self.evaluate(hover_context(f=-0.1))
        self.assertFalse(results['thrust_nonnegative'].satisfied)
        self.assertAlmostEqual(results['thrust_nonnegative'].slack, -0.1)

    def test_attitude_sublevel(self):
        results = self.evaluate(hover_context(psi_R_Rd=2.0))
        self.assertFalse(results['psi_R_Rd'].satisfied)
        self.assertTrue(results['psi_Rd_Rc'].satisfied)

    def test_filter_error(self):
        estimate = EstimatorOutput(np.array([0.1, 0.0, 0.0]), np.zeros(3), np.zeros(3))
        results = self.evaluate(hover_context(estimate=estimate))
        self.assertFalse(results['e_gx'].satisfied)
        self.assertAlmostEqual(results['e_gx'].lhs, 0.1)

    def test_thrust_mismatch_against_tilt(self):
        R = rotation_x(0.3)
        mg = hover_context().f
        untilted = self.evaluate(hover_context(R=R, e_Rd_norm=0.0))
        self.assertFalse(untilted['thrust_mismatch'].satisfied)
        tilted = self.evaluate(hover_context(R=R, e_Rd_norm=np.sin(0.15), f=mg * np.cos(0.15)))
        self.assertTrue(tilted['thrust_mismatch'].satisfied)

    def test_projection_ball(self):
        g1 = np.array([1.0, 0.0, 0.0])
        results = self.evaluate(hover_context(estimate=EstimatorOutput(np.zeros(3), np.zeros(3), g1)))
        self.assertFalse(results['projection_ball'].satisfied)

    def test_reference_acceleration_outside_ball(self):
        ctx = hover_context()
        oracle = ctx.oracle._replace(a_d=np.array([0.3, 0.0, 0.0]))
        results = self.evaluate(hover_context(oracle=oracle))
        self.assertFalse(results['reference_acceleration'].satisfied)
        self.assertAlmostEqual(results['reference_acceleration'].rhs, 0.25)

    def test_omega_c_envelope(self):
        Omega_c = np.array([0.0, 0.0, 0.6])
        results = self.evaluate(hover_context(Omega_c=Omega_c))
        self.assertFalse(results['omega_c_envelope'].satisfied)
        self.assertAlmostEqual(results['omega_c_envelope'].rhs, 0.5)

        results = self.evaluate(hover_context(Omega_c=Omega_c, e_alpha_norm=10.0))
        self.assertTrue(results['omega_c_envelope'].satisfied)
        self.assertAlmostEqual(results['omega_c_envelope'].rhs, np.sqrt(0.5))

    def test_omega_c_envelope_needs_two_samples(self):
        results = self.evaluate(hover_context(Omega_c=None))
        self.assertNotIn('omega_c_envelope', results)


class AuditMonitorTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        scenario = load_scenario(Path(settings.WORKBENCH_SCENARIO_DIR) / 'hover.toml')
        cls.certificate = CertificationService().certify(scenario)

    def make_monitor(self):
        return AuditMonitor(self.certificate.report, self.certificate.inputs, dt=0.01)

    def lyapunov(self, V, e_norm_sq):
        return ZERO_LYAPUNOV._replace(V=V, e_norm_sq=e_norm_sq)

    def test_clean_run(self):
        monitor = self.make_monitor()
        for k in range(5):
            monitor.observe(hover_context(t=0.01 * k))
        self.assertEqual(monitor.violation_count, 0)
        self.assertEqual(monitor.failed(), [])
        self.assertNotIn('lyapunov_decrease', monitor.min_slacks())

    def test_decrease_checked_outside_bound(self):
        big = 10.0 * self.certificate.report.ultimate_bound
        monitor = self.make_monitor()
        for k, V in enumerate((3.0, 2.0, 1.0)):
            monitor.observe(hover_context(t=0.01 * k, lyapunov=self.lyapunov(V, big)))
        self.assertEqual(monitor.summary['lyapunov_decrease'].evaluations, 1)
        self.assertEqual(monitor.summary['lyapunov_decrease'].violations, 0)

        monitor = self.make_monitor()
        for k, V in enumerate((1.0, 2.0, 3.0)):
            monitor.observe(hover_context(t=0.01 * k, lyapunov=self.lyapunov(V, big)))
        self.assertEqual(monitor.summary['lyapunov_decrease'].violations, 1)
        self.assertIn('lyapunov_decrease', monitor.failed())

    def test_decrease_skipped_inside_band(self):
        inside = self.certificate.report.ultimate_bound
        monitor = self.make_monitor()
        for k, V in enumerate((1.0, 2.0, 3.0)):
            monitor.observe(hover_context(t=0.01 * k, lyapunov=self.lyapunov(V, inside)))
        self.assertEqual(monitor.summary['lyapunov_decrease'].evaluations, 0)

    def test_single_violation_fails_monitor(self):
        monitor = self.make_monitor()
        monitor.observe(hover_context(psi_R_Rd=2.0))
        self.assertEqual(monitor.violation_count, 1)
        self.assertEqual(monitor.failed(), ['psi_R_Rd'])

    def test_no_decrease_check_without_bound(self):
        report = replace(self.certificate.report, ultimate_bound=None)
        monitor = AuditMonitor(report, self.certificate.inputs, dt=0.01)
        self.assertIsNone(monitor.decrease_threshold)
