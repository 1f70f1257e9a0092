import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikelqr import dynamics as dyn


def random_plant(rng, n_links):
    return dyn.SystemParams(
        n_links=n_links,
        cart_mass=rng.uniform(1.0, 8.0),
        link_masses=rng.uniform(0.2, 2.0, n_links),
        link_lengths=rng.uniform(0.3, 2.5, n_links),
    )


def random_state(rng, params, angle=0.6, speed=1.5):
    s = np.empty(params.state_dim)
    n = params.n_links
    s[0] = rng.uniform(-1, 1)
    s[1:n + 1] = rng.uniform(-angle, angle, n)
    s[n + 1] = rng.uniform(-speed, speed)
    s[n + 2:] = rng.uniform(-speed, speed, n)
    return s


def row_scale(params):
    # angle rows of the returned system are the Lagrangian rows divided by l_i
    return np.diag(np.concatenate(([1.0], params.link_lengths)))


def lagrangian(params, q, qd):
    s = np.concatenate((q, qd))
    return dyn.kinetic_energy(params, s) - dyn.potential_energy(params, s)


def ke_hessian_fd(params, q, qd, h=1e-6):
    """Inertia matrix as the numerical Hessian of the kinetic energy in qdot."""
    n1 = params.n_links + 1
    hess = np.empty((n1, n1))
    for i in range(n1):
        for j in range(n1):
            out = 0.0
            for si in (1, -1):
                for sj in (1, -1):
                    v = qd.copy()
                    v[i] += si * h
                    v[j] += sj * h
                    out += si * sj * dyn.kinetic_energy(params, np.concatenate((q, v)))
            hess[i, j] = out / (4 * h * h)
    return hess


def euler_lagrange_fd(params, q, qd, qdd, h=1e-6):
    """Numeric d/dt (dL/dqdot) - dL/dq along the direction (qd, qdd)."""
    n1 = params.n_links + 1

    def dl_dqd(qq, vv):
        out = np.empty(n1)
        for i in range(n1):
            vp, vm = vv.copy(), vv.copy()
            vp[i] += h
            vm[i] -= h
            out[i] = (lagrangian(params, qq, vp) - lagrangian(params, qq, vm)) / (2 * h)
        return out

    ddt = (dl_dqd(q + h * qd, qd + h * qdd) - dl_dqd(q - h * qd, qd - h * qdd)) / (2 * h)
    dl_dq = np.empty(n1)
    for i in range(n1):
        qp, qm = q.copy(), q.copy()
        qp[i] += h
        qm[i] -= h
        dl_dq[i] = (lagrangian(params, qp, qd) - lagrangian(params, qm, qd)) / (2 * h)
    return ddt - dl_dq


class TestMassMatrix:
    def test_cartpole_at_upright(self):
        p = dyn.SystemParams(1, 5.0, [1.0], [2.0])
        m = dyn.mass_matrix(p, dyn.upright_state(p))
        assert np.allclose(m, [[6.0, 2.0], [1.0, 2.0]], atol=1e-14)

    def test_right_angle_kills_coupling(self):
        p = dyn.SystemParams(1, 5.0, [1.0], [2.0])
        m = dyn.mass_matrix(p, dyn.upright_state(p, [np.pi / 2]))
        assert abs(m[0, 1]) < 1e-12 and abs(m[1, 0]) < 1e-12

    @pytest.mark.parametrize("n_links", [1, 2, 3])
    def test_matches_kinetic_energy_hessian(self, n_links):
        rng = np.random.default_rng(42)
        for _ in range(5):
            p = random_plant(rng, n_links)
            s = random_state(rng, p)
            n1 = n_links + 1
            q, qd = s[:n1], s[n1:]
            expected = np.linalg.solve(row_scale(p), ke_hessian_fd(p, q, qd))
            got = dyn.mass_matrix(p, s)
            # KE is quadratic in qdot, so the oracle's only error is the
            # roundoff floor of the double difference (~1e-3 at h=1e-6)
            assert np.allclose(got, expected, rtol=1e-3, atol=2e-3)

    def test_symmetric_positive_definite_rescaled(self):
        # the unscaled Lagrangian inertia matrix is symmetric PD at any state
        rng = np.random.default_rng(7)
        for _ in range(200):
            p = random_plant(rng, int(rng.integers(1, 5)))
            m_true = row_scale(p) @ dyn.mass_matrix(p, random_state(rng, p, angle=np.pi))
            assert np.max(np.abs(m_true - m_true.T)) < 1e-12
            np.linalg.cholesky(m_true)


class TestForcing:
    def test_equilibrium_is_zero(self):
        for n in (1, 2, 4):
            p = dyn.make_plant(n)
            f = dyn.forcing(p, dyn.upright_state(p), 0.0)
            assert np.allclose(f, 0.0, atol=1e-15)

    def test_cartpole_gravity_term(self):
        p = dyn.SystemParams(1, 5.0, [1.0], [2.0])
        f = dyn.forcing(p, dyn.upright_state(p, [0.1]), 0.0)
        assert f[1] == pytest.approx(1.0 * 9.81 * np.sin(0.1), rel=1e-12)

    @pytest.mark.parametrize("n_links", [1, 2, 3])
    def test_matches_euler_lagrange(self, n_links):
        rng = np.random.default_rng(3)
        for _ in range(5):
            p = random_plant(rng, n_links)
            s = random_state(rng, p)
            u = rng.uniform(-5, 5)
            n1 = n_links + 1
            q, qd = s[:n1], s[n1:]
            gen_force = np.zeros(n1)
            gen_force[0] = u
            # EL is linear in qddot: the zero-acceleration value isolates f
            h_vec = euler_lagrange_fd(p, q, qd, np.zeros(n1))
            expected = np.linalg.solve(row_scale(p), gen_force - h_vec)
            assert np.allclose(dyn.forcing(p, s, u), expected, rtol=1e-3, atol=1e-3)


class TestAccel:
    def test_equilibrium(self):
        p = dyn.make_plant(2)
        assert np.allclose(dyn.accel(p, dyn.upright_state(p), 0.0), 0.0, atol=1e-15)

    def test_cartpole_closed_form(self):
        M, m, length, g = 5.0, 1.0, 2.0, 9.81
        p = dyn.SystemParams(1, M, [m], [length])
        s = dyn.upright_state(p, [0.2])
        got = dyn.accel(p, s, 0.0)
        # independent 2x2 solve of the cartpole equations of motion
        th = 0.2
        a11, a12 = m + M, m * length * np.cos(th)
        a21, a22 = m * np.cos(th), m * length
        b1, b2 = 0.0, m * g * np.sin(th)
        det = a11 * a22 - a12 * a21
        expected = np.array([(a22 * b1 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det])
        assert np.allclose(got, expected, rtol=1e-12)

    def test_defining_residual(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            p = random_plant(rng, int(rng.integers(1, 5)))
            s = random_state(rng, p, angle=np.pi, speed=3.0)
            u = rng.uniform(-20, 20)
            f = dyn.forcing(p, s, u)
            resid = dyn.mass_matrix(p, s) @ dyn.accel(p, s, u) - f
            assert np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(f))

    def test_euler_lagrange_of_accel(self):
        rng = np.random.default_rng(5)
        for n_links in (1, 2):
            p = random_plant(rng, n_links)
            s = random_state(rng, p)
            u = rng.uniform(-5, 5)
            n1 = n_links + 1
            qdd = dyn.accel(p, s, u)
            el = euler_lagrange_fd(p, s[:n1], s[n1:], qdd)
            gen_force = np.zeros(n1)
            gen_force[0] = u
            assert np.allclose(el, gen_force, rtol=1e-3, atol=1e-3)


class TestLinearize:
    def test_cartpole_coefficients(self):
        p = dyn.SystemParams(1, 5.0, [1.0], [2.0])
        m = dyn.linearize(p)
        xdd_row = m.A[2]
        assert xdd_row[1] == pytest.approx(-1.0 * 9.81 / 5.0, rel=1e-12)  # -mg/M on theta
        assert m.B[2, 0] == pytest.approx(1.0 / 5.0, rel=1e-12)
        assert m.B[3, 0] == pytest.approx(-1.0 / (5.0 * 2.0), rel=1e-12)
        assert m.A[3, 1] == pytest.approx((1.0 + 5.0) * 9.81 / (5.0 * 2.0), rel=1e-12)

    @pytest.mark.parametrize("n_links", [1, 2, 3, 4])
    def test_matches_finite_difference_jacobian(self, n_links):
        p = dyn.make_plant(n_links)
        m = dyn.linearize(p)
        dim = p.state_dim
        h = 1e-6
        jac = np.empty((dim, dim))
        for j in range(dim):
            sp, sm = np.zeros(dim), np.zeros(dim)
            sp[j] += h
            sm[j] -= h
            jac[:, j] = (dyn.state_derivative(p, sp, 0.0) - dyn.state_derivative(p, sm, 0.0)) / (2 * h)
        b_fd = (dyn.state_derivative(p, np.zeros(dim), h) - dyn.state_derivative(p, np.zeros(dim), -h)) / (2 * h)
        scale = max(1.0, np.abs(m.A).max())
        assert np.max(np.abs(m.A - jac)) <= 1e-5 * scale
        assert np.max(np.abs(m.B[:, 0] - b_fd)) <= 1e-5 * max(1.0, np.abs(m.B).max())

    def test_velocity_rows_exact(self):
        p = dyn.make_plant(3)
        m = dyn.linearize(p)
        n1 = p.n_links + 1
        assert np.array_equal(m.A[:n1, :n1], np.zeros((n1, n1)))
        assert np.array_equal(m.A[:n1, n1:], np.eye(n1))

    def test_single_link_reduces_to_cartpole(self):
        # general n-link assembly at n=1 equals the dedicated cartpole matrices
        M, m_b, length, g = 5.0, 1.0, 2.0, 9.81
        p = dyn.SystemParams(1, M, [m_b], [length])
        model = dyn.linearize(p)
        perm = dyn.report_order(p)
        A_ref = np.array([
            [0, 1, 0, 0],
            [0, 0, -m_b * g / M, 0],
            [0, 0, 0, 1],
            [0, 0, (m_b + M) * g / (M * length), 0],
        ])
        B_ref = np.array([[0.0], [1 / M], [0.0], [-1 / (M * length)]])
        assert np.max(np.abs(model.A[np.ix_(perm, perm)] - A_ref)) <= 1e-12
        assert np.max(np.abs(model.B[perm] - B_ref)) <= 1e-12


class TestIntegration:
    def test_uep_fixed_point(self):
        p = dyn.make_plant(1)
        s = dyn.upright_state(p)
        assert np.array_equal(dyn.rk4_step(p, s, 0.0, 1e-3), s)

    def test_energy_conservation_short(self):
        # fuller 10 s / dt=1e-4 sweep lives in the acceptance suite
        p = dyn.make_plant(2)
        s = dyn.upright_state(p, [0.3, 0.25])
        e0 = dyn.total_energy(p, s)
        for _ in range(20000):
            s = dyn.rk4_step(p, s, 0.0, 1e-4)
        assert abs(dyn.total_energy(p, s) - e0) <= 1e-6 * abs(e0)

    def test_fourth_order_convergence(self):
        p = dyn.make_plant(1)
        s0 = dyn.upright_state(p, [0.5])
        s0[2] = 0.4
        horizon = 0.4

        def integrate(dt):
            s = s0
            for _ in range(round(horizon / dt)):
                s = dyn.rk4_step(p, s, 1.0, dt)
            return s

        ref = integrate(4e-4)
        err_coarse = np.linalg.norm(integrate(8e-3) - ref)
        err_fine = np.linalg.norm(integrate(4e-3) - ref)
        assert 10 <= err_coarse / err_fine <= 24  # ~16x per halving, 4th order

    def test_energy_values(self):
        p = dyn.SystemParams(1, 5.0, [1.0], [2.0])
        assert dyn.total_energy(p, dyn.upright_state(p)) == 0.0
        moving = dyn.upright_state(p)
        moving[2] = 1.0
        assert dyn.total_energy(p, moving) == pytest.approx(3.0, rel=1e-12)
        hanging = dyn.upright_state(p, [np.pi])
        assert dyn.total_energy(p, hanging) == pytest.approx(-2 * 1.0 * 9.81 * 2.0, rel=1e-12)


class TestValidation:
    def test_rejects_bad_params(self):
        with pytest.raises(ValueError):
            dyn.SystemParams(1, -5.0, [1.0], [2.0])
        with pytest.raises(ValueError):
            dyn.SystemParams(1, 5.0, [-1.0], [2.0])
        with pytest.raises(ValueError):
            dyn.SystemParams(0, 5.0, [], [])
        with pytest.raises(ValueError):
            dyn.SystemParams(2, 5.0, [1.0], [2.0, 1.0])

    @given(st.floats(-3.0, 3.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
    @settings(max_examples=50, deadline=None)
    def test_residual_property(self, theta, thetadot, xdot):
        p = dyn.make_plant(1)
        s = np.array([0.0, theta, xdot, thetadot])
        f = dyn.forcing(p, s, 1.5)
        resid = dyn.mass_matrix(p, s) @ dyn.accel(p, s, 1.5) - f
        assert np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(f))


class TestEngineEquivalence:
    def test_engine_matches_numpy_derivative(self):
        from spikelqr import _engine
        rng = np.random.default_rng(19)
        for _ in range(50):
            p = random_plant(rng, int(rng.integers(1, 5)))
            s = random_state(rng, p, angle=np.pi, speed=3.0)
            u = rng.uniform(-20, 20)
            out = np.empty(p.state_dim)
            _engine.derivative(*dyn._engine_args(p), s, u, out)
            ref = dyn.state_derivative(p, s, u)
            assert np.allclose(out, ref, rtol=1e-12, atol=1e-12)

    def test_advance_equals_repeated_steps(self):
        p = dyn.make_plant(2)
        s = dyn.upright_state(p, [0.2, 0.1])
        direct = dyn.advance_zoh(p, s, 1.0, 1e-3, 10)
        stepped = s
        for _ in range(10):
            stepped = dyn.rk4_step(p, stepped, 1.0, 1e-3)
        assert np.allclose(direct, stepped, rtol=1e-14, atol=1e-14)
