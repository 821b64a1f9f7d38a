import math
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from certification.analysis import (
    CONDITIONS,
    CertificateInputs,
    compute_constants,
    estimate_omega_c_bound,
    initial_filter_errors,
    lyapunov_eval,
    w_matrices,
)
from certification.services import CertificationService, report_lines
from flight.controller import AttitudeFilterState, ControllerGains, PositionLoopState
from flight.dynamics import MultirotorState, VehicleParams
from flight.estimator import EstimatorGains
from flight.scenario import ConfigError, load_scenario
from flight.trajectory import Circle, Hover, TrajectoryBounds


def shipped(name):
    return load_scenario(Path(settings.WORKBENCH_SCENARIO_DIR) / f'{name}.toml')


def unit_inputs(**overrides):
    values = dict(
        vehicle=VehicleParams(m=1.0, J=[0.02, 0.02, 0.04], g=9.81),
        gains=ControllerGains(k_alpha=1.0, alpha_x=0.5, alpha_f=1.0, k_R=400.0, k_Omega=2.0,
                              gamma3=0.002, gamma4=0.002),
        estimator=EstimatorGains(gamma1=0.05, gamma2=0.05, gamma21=0.05, eps0=0.1, h2=2.0),
        bounds=TrajectoryBounds(0.5, 0.25, 0.125, 0.0625, 0.5, 0.25),
        c1=0.02, L1=0.05, rho02=0.5, e_alpha_bar=150.0,
        g1_bound='nominal',
    )
    values.update(overrides)
    return CertificateInputs(**values)


class VirtualInputBoundTests(SimpleTestCase):

    def test_hand_computed_bounds(self):
        report = compute_constants(unit_inputs())
        self.assertEqual(round(report.alpha1, 4), 17.0062)
        self.assertEqual(round(report.alpha2, 4), 4.81)

    def test_projection_bound_uses_ball_radius(self):
        nominal = compute_constants(unit_inputs())
        projected = compute_constants(unit_inputs(g1_bound='projection'))
        self.assertAlmostEqual(projected.alpha1 - nominal.alpha1, 2.0 * (math.sqrt(1.1) - 1.0), places=12)

    def test_input_validation(self):
        with self.assertRaises(ValueError):
            unit_inputs(c1=0.0)
        with self.assertRaises(ValueError):
            unit_inputs(e_gx0=-1.0)
        with self.assertRaises(ValueError):
            unit_inputs(g1_bound='loose')


class CircleCertificateTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.certificate = CertificationService().certify(shipped('circle'))
        cls.report = cls.certificate.report

    def test_passes(self):
        self.assertTrue(self.report.passed)
        self.assertEqual(self.report.failing, [])
        self.assertEqual(set(self.report.condition_flags), set(CONDITIONS))
        self.assertEqual(self.report.omega_c_source, 'scenario')
        self.assertFalse(self.report.e_alpha_bar_assumed)

    def test_constants(self):
        r = self.report
        self.assertAlmostEqual(r.alpha1, 9.5714, places=4)
        self.assertAlmostEqual(r.rho03, 1.3575, places=12)
        self.assertAlmostEqual(r.lambda1, 0.5925, places=12)
        self.assertAlmostEqual(r.lambda2, 0.15, places=12)
        self.assertAlmostEqual(r.lambda3, 0.1, places=12)
        self.assertAlmostEqual(r.lambda4, 66.775, delta=1e-3)
        self.assertAlmostEqual(r.lambda5, 250.0, places=9)
        self.assertAlmostEqual(r.lambda6, 0.99, places=12)
        self.assertAlmostEqual(r.lambda7, 15.775, delta=1e-3)
        self.assertAlmostEqual(r.lambda_V, 0.1, places=12)
        self.assertAlmostEqual(r.beta_bar, 0.99 / 800.0, delta=1e-8)

    def test_ultimate_bound(self):
        r = self.report
        self.assertAlmostEqual(r.alpha6, 40.0125, delta=1e-4)
        # (gamma3/2 + gamma4/(8 gamma3^2)) rho02^2 + (m/2) alpha6^2 with rho02 = 10
        self.assertAlmostEqual(r.D, 62.501 * 100.0 + 0.2 * r.alpha6 ** 2, places=9)
        self.assertAlmostEqual(r.D, 6570.3, delta=0.01)
        self.assertAlmostEqual(r.ultimate_bound, r.D / r.lambda_V, places=9)
        self.assertAlmostEqual(r.e_alpha_required, math.sqrt(5.0 * r.ultimate_bound), places=9)
        self.assertAlmostEqual(r.e_alpha_required, 573.162, delta=0.01)
        self.assertLessEqual(r.e_alpha_required, 600.0)
        self.assertLess(r.D_asymptotic, r.D)

    def test_initial_lyapunov_is_zero_on_reference(self):
        self.assertAlmostEqual(self.certificate.inputs.V0, 0.0, places=12)

    def test_region_of_attraction(self):
        self.assertAlmostEqual(self.report.roa_rate_limit(0.0), 200.0, places=9)
        self.assertEqual(self.report.roa_rate_limit(2.0), 0.0)
        self.assertLess(self.report.roa_rate_limit(1.0, 'unit'), self.report.roa_rate_limit(0.0, 'unit'))

    def test_report_lines(self):
        lines = report_lines(self.report, '%.6g')
        self.assertIn('lambda_V = 0.1', lines)
        self.assertIn('passed = true', lines)
        self.assertIn(
            f"condition.auxiliary_gain_order = pass  # {CONDITIONS['auxiliary_gain_order']}", lines
        )


class GainConditionTests(SimpleTestCase):

    def setUp(self):
        self.scenario = shipped('circle')
        self.service = CertificationService()

    def with_gains(self, **changes):
        return replace(self.scenario, gains=replace(self.scenario.gains, **changes))

    def test_k_alpha_at_gravity_fails(self):
        report = self.service.certify(self.with_gains(k_alpha=9.81)).report
        self.assertFalse(report.passed)
        self.assertIn('virtual_input_positive', report.failing)
        self.assertLessEqual(report.alpha2, 0.0)

    def test_auxiliary_gain_order(self):
        report = self.service.certify(self.with_gains(alpha_f=0.5)).report
        self.assertEqual(report.lambda3, 0.0)
        self.assertIn('auxiliary_gain_order', report.failing)

    def test_attitude_filter_rate(self):
        report = self.service.certify(self.with_gains(gamma3=0.01)).report
        self.assertIn('attitude_filter_rate', report.failing)

    def test_negative_lambda_has_no_bound(self):
        report = self.service.certify(self.with_gains(alpha_x=3.0)).report
        self.assertIsNone(report.ultimate_bound)
        self.assertIsNone(report.e_alpha_required)
        self.assertIn('e_alpha_domain', report.failing)

    def test_small_e_alpha_bar_fails(self):
        scenario = replace(self.scenario, analysis=replace(self.scenario.analysis, e_alpha_bar=100.0))
        report = self.service.certify(scenario).report
        self.assertEqual(report.failing, ['e_alpha_domain'])

    def test_acceleration_bound_below_reference(self):
        scenario = replace(self.scenario, estimator=replace(self.scenario.estimator, h2=0.1))
        report = self.service.certify(scenario).report
        self.assertFalse(report.passed)
        self.assertFalse(report.condition_flags['acceleration_bound'])
        self.assertIn('acceleration_bound', report.failing)

    def test_estimated_omega_c_bound(self):
        scenario = replace(self.scenario, analysis=replace(self.scenario.analysis, L1=None, rho02=None))
        report = self.service.certify(scenario).report
        self.assertEqual(report.omega_c_source, 'estimate')
        self.assertFalse(report.passed)
        self.assertIn('translational_damping', report.failing)
        self.assertIn('omega_c_source = estimate', report_lines(report))

    def test_estimated_e_alpha_bar(self):
        scenario = replace(self.scenario, analysis=replace(self.scenario.analysis, e_alpha_bar=None))
        with self.assertLogs('certification.services', 'WARNING'):
            certificate = self.service.certify(scenario)
        report = certificate.report
        self.assertTrue(report.condition_flags['e_alpha_domain'])
        self.assertTrue(report.e_alpha_bar_assumed)
        self.assertEqual(certificate.inputs.e_alpha_bar, report.e_alpha_required)
        self.assertIn(
            f"condition.e_alpha_domain = assumed  # {CONDITIONS['e_alpha_domain']}", report_lines(report)
        )

    def test_pinned_filter_errors(self):
        scenario = replace(
            self.scenario, analysis=replace(self.scenario.analysis, initial_filter_errors=(0.0, 0.0, 0.0, 0.0))
        )
        report = self.service.certify(scenario).report
        self.assertAlmostEqual(report.alpha3, 0.05 * 0.25)
        self.assertAlmostEqual(report.D, report.D_asymptotic, places=9)
        self.assertLess(report.D - 62.501 * 100.0, 1.0)

    def test_step_reference_cannot_be_certified(self):
        with self.assertRaises(ConfigError) as ctx:
            self.service.certify(shipped('step'))
        self.assertEqual(ctx.exception.key, 'trajectory.kind')

    def test_unestimable_omega_c_bound(self):
        scenario = replace(
            self.with_gains(k_alpha=8.0), analysis=replace(self.scenario.analysis, L1=None)
        )
        with self.assertRaises(ConfigError) as ctx:
            self.service.certify(scenario)
        self.assertEqual(ctx.exception.key, 'analysis.L1')


class FilterErrorTests(SimpleTestCase):

    def test_circle_initial_errors(self):
        est = EstimatorGains(gamma1=0.05, gamma2=0.05, gamma21=0.05, eps0=0.1, h2=0.25)
        errors = initial_filter_errors(Circle(radius=1.0, omega=0.5), est)
        self.assertAlmostEqual(errors.e_gx0, 0.5)
        self.assertAlmostEqual(errors.e_xdd0, math.sqrt(100.0625), places=12)
        self.assertAlmostEqual(errors.e_gv0, 10.0)
        self.assertAlmostEqual(errors.e_g10, 0.25)

    def test_hover_has_no_initial_errors(self):
        est = EstimatorGains(gamma1=0.05, gamma2=0.05, gamma21=0.05, eps0=0.1, h2=0.25)
        self.assertEqual(tuple(initial_filter_errors(Hover(), est)), (0.0, 0.0, 0.0, 0.0))


class OmegaCBoundTests(SimpleTestCase):

    def setUp(self):
        scenario = shipped('circle')
        self.args = (scenario.vehicle, scenario.gains, scenario.estimator, scenario.trajectory.bounds)
        self.errors = CertificationService().filter_errors(scenario)

    def test_envelope_is_affine_and_positive(self):
        bound = estimate_omega_c_bound(*self.args, self.errors, e_alpha_bar=10.0)
        self.assertGreater(bound.slope, 0.0)
        self.assertGreater(bound.offset, 0.0)
        self.assertAlmostEqual(bound.L1, math.sqrt(2.0) * bound.slope)
        self.assertAlmostEqual(bound.rho02, math.sqrt(2.0) * bound.offset)

    def test_requires_positive_thrust_floor(self):
        vehicle, gains, est, bounds = self.args
        with self.assertRaises(ValueError):
            estimate_omega_c_bound(vehicle, replace(gains, k_alpha=9.0), est, bounds, self.errors, 10.0)


class LyapunovTests(SimpleTestCase):

    def test_w_matrices(self):
        vehicle = VehicleParams(m=0.4, J=[0.02, 0.02, 0.04])
        gains = ControllerGains(k_alpha=6.0, alpha_x=0.5, alpha_f=1.0, k_R=400.0, k_Omega=2.0,
                                gamma3=0.002, gamma4=0.002)
        W11, W12 = w_matrices(vehicle, gains, 0.02)
        np.testing.assert_allclose(W11, [[400.0, 0.01], [0.01, 0.01]])
        np.testing.assert_allclose(W12, [[800.0, 0.01], [0.01, 0.02]])
        self.assertTrue(np.all(np.linalg.eigvalsh(W11) > 0.0))

    def test_zero_at_equilibrium(self):
        ci = unit_inputs()
        traj = Hover(position=(0.0, 0.0, -1.0))
        s = MultirotorState.hover((0.0, 0.0, -1.0))
        afs = AttitudeFilterState(R_d=np.eye(3), Omega_d=np.zeros(3))
        values = lyapunov_eval(s, afs, PositionLoopState.zero(), np.eye(3), traj.sample(0.0), ci, np.zeros(3))
        self.assertEqual(values.V, 0.0)
        self.assertEqual(values.e_norm_sq, 0.0)

    def test_components(self):
        ci = unit_inputs()
        traj = Hover()
        s = MultirotorState(x=np.array([0.1, 0.0, 0.0]), v=np.array([0.0, 0.2, 0.0]),
                            R=np.eye(3), Omega=np.array([0.0, 0.0, 0.3]))
        afs = AttitudeFilterState(R_d=np.eye(3), Omega_d=np.zeros(3))
        values = lyapunov_eval(s, afs, PositionLoopState.zero(), np.eye(3), traj.sample(0.0), ci, np.zeros(3))
        self.assertAlmostEqual(values.V2, 0.5 * 0.09, places=12)
        self.assertAlmostEqual(values.V2_J, 0.5 * 0.04 * 0.09, places=12)
        e_alpha = np.array([0.5 * math.tanh(0.1), 0.2, 0.0])
        expected_V3 = 0.5 * float(e_alpha @ e_alpha) + math.log(math.cosh(0.1))
        self.assertAlmostEqual(values.V3, expected_V3, places=12)
        self.assertEqual(values.V4, 0.0)
        self.assertAlmostEqual(values.V, values.V2 + values.V3 + values.V4, places=14)
