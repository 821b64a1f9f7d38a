import numpy as np
from django.test import SimpleTestCase, tag

from flight.dynamics import (
    ControlInput,
    MixerConfig,
    MultirotorState,
    NegativeThrustError,
    NonFiniteError,
    RankDeficientError,
    VehicleParams,
    allocate_rotors,
    quad_x_mixer,
    state_derivative,
    step,
)
from flight.so3 import exp_so3, orthonormality_residual


def tumble(p: VehicleParams, Omega0, M, dt: float, duration: float) -> MultirotorState:
    s = MultirotorState(x=np.zeros(3), v=np.zeros(3), R=np.eye(3), Omega=np.array(Omega0, dtype=float))
    u = ControlInput(f=0.0, M=np.array(M, dtype=float))
    for _ in range(int(round(duration / dt))):
        s = step(s, u, p, dt)
    return s


class VehicleParamsTests(SimpleTestCase):

    def test_diagonal_inertia(self):
        p = VehicleParams(m=0.4, J=[0.02, 0.02, 0.04])
        np.testing.assert_array_equal(p.J, np.diag([0.02, 0.02, 0.04]))
        self.assertAlmostEqual(p.lambda_min, 0.02)
        self.assertAlmostEqual(p.lambda_max, 0.04)

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError):
            VehicleParams(m=0.0, J=[1.0, 1.0, 1.0])
        with self.assertRaises(ValueError):
            VehicleParams(m=1.0, J=[1.0, -1.0, 1.0])
        with self.assertRaises(ValueError):
            VehicleParams(m=1.0, J=[[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


class StateDerivativeTests(SimpleTestCase):

    def test_hover_equilibrium(self):
        p = VehicleParams(m=0.4, J=[0.02, 0.02, 0.04])
        d = state_derivative(MultirotorState.hover(), ControlInput(f=p.m * p.g, M=np.zeros(3)), p)
        np.testing.assert_array_equal(d.v_dot, np.zeros(3))
        np.testing.assert_array_equal(d.Omega_dot, np.zeros(3))

    def test_gyroscopic_term(self):
        p = VehicleParams(m=1.0, J=[0.02, 0.02, 0.04])
        Omega = np.array([1.0, 2.0, 3.0])
        s = MultirotorState(x=np.zeros(3), v=np.zeros(3), R=np.eye(3), Omega=Omega)
        d = state_derivative(s, ControlInput(f=0.0, M=np.zeros(3)), p)
        expected = np.linalg.solve(p.J, -np.cross(Omega, p.J @ Omega))
        np.testing.assert_allclose(d.Omega_dot, expected, atol=1e-12)
        np.testing.assert_allclose(d.Omega_dot, [-6.0, 3.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(d.Omega_hat @ np.array([0.0, 0.0, 1.0]), np.cross(Omega, [0, 0, 1]))

    def test_free_fall(self):
        p = VehicleParams(m=1.0, J=[1.0, 1.0, 1.0])
        d = state_derivative(MultirotorState.hover(), ControlInput(f=0.0, M=np.zeros(3)), p)
        np.testing.assert_allclose(d.v_dot, [0.0, 0.0, 9.81])

    def test_non_finite(self):
        p = VehicleParams(m=1.0, J=[1.0, 1.0, 1.0])
        with self.assertRaises(NonFiniteError):
            state_derivative(MultirotorState.hover(), ControlInput(f=np.inf, M=np.zeros(3)), p)


class StepTests(SimpleTestCase):

    def setUp(self):
        self.p = VehicleParams(m=0.4, J=[0.02, 0.03, 0.04])

    def test_hover_stays_put(self):
        s0 = MultirotorState.hover((1.0, 2.0, 3.0))
        s = step(s0, ControlInput(f=self.p.m * self.p.g, M=np.zeros(3)), self.p, 0.01)
        np.testing.assert_allclose(s.x, s0.x, atol=1e-15)
        np.testing.assert_allclose(s.v, np.zeros(3), atol=1e-15)

    def test_rejects_negative_thrust(self):
        with self.assertRaises(NegativeThrustError) as ctx:
            step(MultirotorState.hover(), ControlInput(f=-1.0, M=np.zeros(3)), self.p, 0.01)
        self.assertEqual(ctx.exception.thrust, -1.0)

    def test_rejects_bad_dt(self):
        with self.assertRaises(ValueError):
            step(MultirotorState.hover(), ControlInput(f=1.0, M=np.zeros(3)), self.p, 0.0)

    def test_constant_rate_rotation_is_exact(self):
        Omega = np.array([0.3, -0.2, 0.5])
        p = VehicleParams(m=1.0, J=[1.0, 1.0, 1.0])
        s = tumble(p, Omega, np.zeros(3), 0.01, 1.0)
        np.testing.assert_allclose(s.R, exp_so3(Omega * 1.0), atol=1e-12)

    def test_torque_free_invariants(self):
        J = self.p.J
        Omega0 = np.array([1.0, 2.0, 3.0])
        energy0 = 0.5 * Omega0 @ J @ Omega0
        momentum0 = np.linalg.norm(J @ Omega0)
        s = tumble(self.p, Omega0, np.zeros(3), 1e-3, 10.0)
        self.assertAlmostEqual(0.5 * s.Omega @ J @ s.Omega, energy0, delta=1e-6)
        self.assertAlmostEqual(np.linalg.norm(J @ s.Omega), momentum0, delta=1e-6)
        # spatial angular momentum is conserved too
        np.testing.assert_allclose(s.R @ J @ s.Omega, J @ Omega0, atol=1e-6)

    def test_fourth_order_convergence(self):
        Omega0 = [1.0, 2.0, 3.0]
        M = [0.01, -0.02, 0.005]
        T = 1.0
        reference = tumble(self.p, Omega0, M, 0.02 / 8, T)
        coarse = tumble(self.p, Omega0, M, 0.02, T)
        fine = tumble(self.p, Omega0, M, 0.01, T)

        def error(s):
            return np.linalg.norm(s.R - reference.R) + np.linalg.norm(s.Omega - reference.Omega)

        ratio = error(coarse) / error(fine)
        self.assertGreaterEqual(ratio, 12.0)
        self.assertLessEqual(ratio, 20.0)

    @tag('slow')
    def test_orthonormality_over_long_run(self):
        s = MultirotorState(x=np.zeros(3), v=np.zeros(3), R=np.eye(3), Omega=np.array([1.0, 2.0, 3.0]))
        u = ControlInput(f=0.0, M=np.array([0.001, 0.0, -0.002]))
        for _ in range(100000):
            s = step(s, u, self.p, 1e-3)
        self.assertLess(orthonormality_residual(s.R), 1e-9)


class AllocationTests(SimpleTestCase):

    def test_hover_allocation(self):
        alloc = allocate_rotors(ControlInput(f=4.0, M=np.zeros(3)), quad_x_mixer())
        np.testing.assert_allclose(alloc.speeds_sq, np.ones(4), atol=1e-12)
        self.assertFalse(alloc.infeasible)

    def test_reproduces_wrench(self):
        mix = quad_x_mixer(arm=0.2, thrust_coeff=2.0, moment_coeff=0.1)
        u = ControlInput(f=8.0, M=np.array([0.1, -0.2, 0.05]))
        alloc = allocate_rotors(u, mix)
        np.testing.assert_allclose(mix.gamma @ alloc.speeds_sq, [8.0, 0.1, -0.2, 0.05], atol=1e-12)

    def test_infeasible_flagged(self):
        alloc = allocate_rotors(ControlInput(f=0.1, M=np.array([0.0, 0.0, 5.0])), quad_x_mixer())
        self.assertTrue(alloc.infeasible)
        self.assertTrue(np.any(alloc.speeds_sq < 0.0))

    def test_rank_deficient(self):
        gamma = np.ones((4, 4))
        with self.assertRaises(RankDeficientError):
            allocate_rotors(ControlInput(f=1.0, M=np.zeros(3)), MixerConfig(gamma))

    def test_mixer_shape(self):
        with self.assertRaises(ValueError):
            MixerConfig(np.ones((3, 4)))
        self.assertEqual(MixerConfig(np.ones((4, 6))).n, 6)
