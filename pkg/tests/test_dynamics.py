import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenlab import duhamel, duhamel_regularized, integrated_trajectory, propagate
from greenlab.dynamics import Trajectory, phi_kernel
from greenlab.numerics import NumericsError
from greenlab.scenarios import admissible_state

from conftest import dirac, domain_state, random_state


def eigvec(ext, k):
    return ext.embed(ext.spectral.eigenvectors[:, k])


def apply_L(ext, w):
    return ext.embed(ext.reduced_matrix @ ext.restrict(w))


def source(y, a, b):
    def g(s):
        s = np.asarray(s, dtype=float)[:, None]
        return np.cos(2 * s) * y + s**2 * b

    def dg(s):
        s = np.asarray(s, dtype=float)[:, None]
        return -2 * np.sin(2 * s) * y + 2 * s * b

    return g, dg


class TestPropagate:
    def test_identity_at_origin(self, sys64, rng):
        sys, ext = sys64
        y = domain_state(sys, rng)
        assert np.allclose(propagate(ext, y, 0.7, 0.7), y, atol=1e-12)

    def test_eigenvector_phase(self, sys64):
        _, ext = sys64
        k = 40
        lam = ext.spectral.eigenvalues[k]
        e = eigvec(ext, k)
        assert np.allclose(propagate(ext, e, 0.2, 1.3), np.exp(1.1j * lam) * e, atol=1e-12)

    def test_unitarity(self, sys64, rng):
        sys, ext = sys64
        for _ in range(50):
            y = domain_state(sys, rng)
            t = rng.uniform(-5, 5)
            assert abs(sys.norm(propagate(ext, y, 0.0, t)) - sys.norm(y)) <= 1e-10 * sys.norm(y)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
    def test_group_property(self, s, t, seed):
        sys, ext = dirac(64)
        y = domain_state(sys, np.random.default_rng(seed))
        lhs = propagate(ext, propagate(ext, y, 0.0, s), 0.0, t)
        assert sys.norm(lhs - propagate(ext, y, 0.0, s + t)) <= 1e-9 * sys.norm(y)

    def test_rejects_states_outside_domain(self, sys64, rng):
        sys, ext = sys64
        with pytest.raises(NumericsError):
            propagate(ext, random_state(sys, rng), 0.0, 1.0)

    def test_vector_of_times(self, sys64, rng):
        sys, ext = sys64
        y = domain_state(sys, rng)
        out = propagate(ext, y, 0.0, [0.0, 0.5])
        assert out.shape == (2, sys.state_dim)
        assert np.allclose(out[1], propagate(ext, y, 0.0, 0.5))

    def test_eigenvector_stays_eigenvector(self, sys64):
        _, ext = sys64
        e = eigvec(ext, 10)
        v = propagate(ext, e, 0.0, 0.9)
        lam = ext.spectral.eigenvalues[10]
        assert np.allclose(apply_L(ext, v), lam * v, atol=1e-10)


class TestDuhamel:
    def test_zero_source(self, sys64):
        sys, ext = sys64
        g = np.zeros((11, sys.state_dim))
        assert np.allclose(duhamel(ext, g, 0.0, 1.0), 0)
        assert np.allclose(duhamel_regularized(ext, g, g, 0.0, 1.0), 0)

    @pytest.mark.parametrize("t", [1.0, -0.8])
    def test_constant_eigenvector_source(self, sys64, t):
        _, ext = sys64
        k = 70
        lam = ext.spectral.eigenvalues[k]
        e = eigvec(ext, k)
        n = 20001
        g = np.tile(e, (n, 1))
        w = duhamel(ext, g, 0.0, t)
        closed = (1 / 1j) * (np.exp(1j * t * lam) - 1) / (1j * lam) * e
        assert np.abs(w - closed).max() <= 1e-8

    def test_equation_residual_second_order(self, sys64, rng):
        sys, ext = sys64
        y = admissible_state(sys, rng)
        g, _ = source(y, 0, y)
        t = 0.6

        def residual(dt):
            def w_at(tt):
                s = np.linspace(0.0, tt, int(round(tt / dt)) + 1)
                return duhamel(ext, g(s), 0.0, tt)

            wm, w0, wp = w_at(t - dt), w_at(t), w_at(t + dt)
            r = 1j * (wp - wm) / (2 * dt) + apply_L(ext, w0) - ext.embed(ext.restrict(g([t])[0]))
            return sys.norm(r)

        r1, r2 = residual(0.02), residual(0.01)
        assert r2 < r1
        assert r1 / r2 == pytest.approx(4.0, rel=0.3)

    def test_linearity(self, sys64, rng):
        sys, ext = sys64
        s = np.linspace(0, 1, 201)
        ga = np.outer(np.sin(s), domain_state(sys, rng))
        gb = np.outer(s, domain_state(sys, rng))
        lhs = duhamel(ext, 2 * ga + 1j * gb, 0.0, 1.0)
        rhs = 2 * duhamel(ext, ga, 0.0, 1.0) + 1j * duhamel(ext, gb, 0.0, 1.0)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_too_few_samples(self, sys64):
        sys, ext = sys64
        with pytest.raises(NumericsError):
            duhamel(ext, np.zeros((1, sys.state_dim)), 0.0, 1.0)


class TestRegularized:
    def test_agrees_with_plain_form(self, sys256, rng):
        sys, ext = sys256
        y, b = admissible_state(sys, rng), admissible_state(sys, rng)
        g, dg = source(y, 0, b)
        s = np.linspace(0.0, 1.0, 4001)
        w = duhamel(ext, g(s), 0.0, 1.0)
        wr = duhamel_regularized(ext, g(s), dg(s), 0.0, 1.0)
        assert sys.norm(w - wr) <= 1e-6 * sys.norm(wr)

    def test_backward_agrees(self, sys64, rng):
        sys, ext = sys64
        y = admissible_state(sys, rng)
        g, dg = source(y, 0, y)
        s = np.linspace(-1.0, 0.0, 4001)
        w = duhamel(ext, g(s), 0.0, -1.0)
        wr = duhamel_regularized(ext, g(s), dg(s), 0.0, -1.0)
        assert sys.norm(w - wr) <= 1e-6 * sys.norm(wr)

    def test_output_in_domain(self, sys64, rng):
        sys, ext = sys64
        s = np.linspace(0, 1, 101)
        g = np.outer(np.cos(s), random_state(sys, rng))
        dg = np.outer(-np.sin(s), g[0])
        w = duhamel_regularized(ext, g, dg, 0.0, 1.0)
        assert np.abs(sys.gamma1 @ w).max() == 0.0

    def test_missing_derivative(self, sys64):
        sys, ext = sys64
        with pytest.raises(NumericsError):
            duhamel_regularized(ext, np.zeros((3, sys.state_dim)), None, 0.0, 1.0)

    def test_near_zero_eigenvalue(self):
        sys, ext = dirac(64, 2.0, 1e-9)
        lam = ext.spectral.eigenvalues
        k = int(np.argmin(np.abs(lam - 1e-9)))
        assert abs(lam[k] - 1e-9) < 1e-12
        e = eigvec(ext, k)
        s = np.linspace(0, 1.0, 11)
        w = duhamel_regularized(ext, np.tile(e, (11, 1)), np.zeros((11, sys.state_dim)), 0.0, 1.0)
        assert np.all(np.isfinite(w))
        assert np.allclose(w, -1j * 1.0 * e, atol=1e-8)


def test_phi_kernel_series_branch():
    lam = np.array([0.0, 1e-12, 1e-5, 0.5, 3.0])
    s = 0.8
    vals = phi_kernel(s, lam)
    assert vals[0] == pytest.approx(-1j * s)
    for l, v in zip(lam[1:], vals[1:]):
        exact = complex(-mpmath.expm1(mpmath.mpc(0, s * l)) / l) if l else -1j * s
        assert v == pytest.approx(exact, rel=1e-13)
    # continuity across the cutoff
    cut = 1e-4 / s
    a, b = phi_kernel(s, cut * (1 - 1e-9)), phi_kernel(s, cut * (1 + 1e-9))
    assert abs(a - b) < 1e-12


class TestIntegratedTrajectory:
    def test_zero_at_origin(self, sys64, rng):
        sys, ext = sys64
        assert np.allclose(integrated_trajectory(ext, domain_state(sys, rng), 0.3, 0.3), 0)

    def test_eigenvector(self, sys64):
        _, ext = sys64
        k = 50
        lam = ext.spectral.eigenvalues[k]
        e = eigvec(ext, k)
        w = integrated_trajectory(ext, e, 0.0, 0.75)
        assert np.allclose(w, (np.exp(0.75j * lam) - 1) / (1j * lam) * e, atol=1e-12)

    def test_derivative_is_propagator(self, sys64, rng):
        sys, ext = sys64
        y = admissible_state(sys, rng)

        def err(dt):
            t = -0.4
            d = (integrated_trajectory(ext, y, 0.0, t + dt) - integrated_trajectory(ext, y, 0.0, t - dt)) / (2 * dt)
            return sys.norm(d - propagate(ext, y, 0.0, t))

        e1, e2 = err(1e-2), err(5e-3)
        assert e2 < e1 and e1 / e2 == pytest.approx(4.0, rel=0.2)

    def test_satisfies_integrated_equation(self, sys64, rng):
        sys, ext = sys64
        y = admissible_state(sys, rng)
        dt, t = 1e-3, 0.5
        w = integrated_trajectory(ext, y, 0.0, [t - dt, t, t + dt])
        r = 1j * (w[2] - w[0]) / (2 * dt) + apply_L(ext, w[1]) - 1j * y
        assert sys.norm(r) < 1e-4


def test_trajectory_lookup():
    tr = Trajectory(np.array([0.0, 0.5, 1.0]), np.zeros((3, 4)), 0.0)
    assert np.allclose(tr.at(0.5), 0)
    with pytest.raises(KeyError):
        tr.at(0.25)
    with pytest.raises(NumericsError):
        Trajectory(np.array([0.0]), np.array([[np.nan]]), 0.0)
