import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenlab import Bump, ControlSignal, LiftSolver
from greenlab.analysis import (
    LEFT,
    RIGHT,
    OperatorSpec,
    backward_reachable,
    bump_family,
    check_aux1,
    check_aux2,
    check_auxiliary,
    classify_part,
    decay_probe,
    deficiency_indices,
    membership_probe,
    node_basis,
    polarized_basis,
    principal_angles,
    shooting_indices,
    snapshot_reachable,
    standard_specs,
)
from greenlab.dynamics import integrated_trajectory, propagate
from greenlab.numerics import NumericsError, integrate_time
from greenlab.scenarios import admissible_state

from conftest import dirac


@pytest.fixture(scope="module")
def solver256():
    sys, ext = dirac(256)
    return LiftSolver(sys, ext)


@pytest.fixture(scope="module")
def reports(solver256):
    fw = snapshot_reachable(solver256, bump_family(20, 1.0), 1.0)
    bw = backward_reachable(solver256, bump_family(20, -1.0), -1.0)
    return fw, bw


def ctrl(sys, bumps, T=1.0):
    lo, hi = (0.0, T) if T > 0 else (T, 0.0)
    return ControlSignal.from_bumps(bumps, lo, hi, sys.grid.h / 2)


class TestReachability:
    def test_single_control_rank_one(self, solver256):
        rep = snapshot_reachable(solver256, [Bump(0.5, 0.4)], 1.0)
        assert rep.rank == 1 and rep.controls_used == 1
        back = backward_reachable(solver256, [Bump(-0.5, 0.4)], -1.0)
        assert back.rank == 1 and back.direction == "backward"

    def test_report_invariants(self, reports):
        for rep in reports:
            assert np.all(np.diff(rep.singular_values) <= 0)
            b = rep.reachable_basis
            assert np.allclose(b.conj().T @ (rep.weights[:, None] * b), np.eye(rep.rank), atol=1e-10)
            assert 0 <= rep.predicted_angle_deg <= 90 and 0 <= rep.unreachable_angle_deg <= 90
            p = rep.unreachable_projector()
            assert np.allclose(p @ p, p, atol=1e-10)
            assert np.allclose(p @ b, 0, atol=1e-10)
            json.dumps(rep.to_dict())

    def test_forward_polarization(self, reports):
        assert reports[0].polarization_residual < 1e-3

    def test_forward_window(self, reports):
        assert reports[0].tail_fraction <= 1e-6
        assert reports[0].omega_T == (0.0, 1.0)

    def test_backward_polarization(self, reports):
        assert reports[1].polarization_residual < 1e-3

    def test_forward_backward_nearly_orthogonal(self, reports):
        fw, bw = reports
        angles = np.degrees(principal_angles(fw.reachable_basis, bw.reachable_basis, fw.weights))
        assert angles.min() > 80.0

    def test_unreachable_prediction_contained(self, reports):
        assert reports[0].unreachable_angle_deg <= 5.0

    def test_needs_positive_horizon(self, solver256):
        with pytest.raises(ValueError):
            snapshot_reachable(solver256, [Bump(0.5, 0.4)], -1.0)
        with pytest.raises(ValueError):
            backward_reachable(solver256, [Bump(-0.5, 0.4)], 1.0)

    def test_family_inside_window(self):
        fam = bump_family(20, 1.0)
        assert len(fam) == 20
        assert all(0 < b.support[0] and b.support[1] < 1.0 for b in fam)
        assert all(-1.0 < b.support[0] and b.support[1] < 0 for b in bump_family(20, -1.0))

    def test_polarized_bases_orthogonal(self):
        sys, _ = dirac(64)
        r, l = polarized_basis(sys, RIGHT), polarized_basis(sys, LEFT)
        w = sys.weights
        assert np.allclose(r.conj().T @ (w[:, None] * l), 0)
        assert np.allclose(r.conj().T @ (w[:, None] * r), np.eye(r.shape[1]))
        full = node_basis(sys, -1.0)
        assert full.shape[1] == sys.state_dim


@pytest.fixture(scope="module")
def setup():
    sys, ext = dirac(256)
    solver = LiftSolver(sys, ext)
    y = admissible_state(sys, np.random.default_rng(7))
    f = ctrl(sys, [Bump(0.45, 0.5)])
    return sys, ext, solver, y, f


class TestDuality:
    def test_zero_control(self, setup):
        sys, ext, solver, y, _ = setup
        z = ControlSignal.zero(0.0, 1.0, sys.grid.h / 2)
        for chk in (check_auxiliary(z, y, 1.0, ext, solver), check_aux1(z, y, 1.0, ext, solver)):
            assert chk.lhs == 0 and abs(chk.rhs) == 0
        a2 = check_aux2(z, y, -0.3, 1.0, ext, solver)
        assert a2.lhs == 0 and a2.rhs == 0

    def test_auxiliary(self, setup):
        sys, ext, solver, y, f = setup
        assert check_auxiliary(f, y, 1.0, ext, solver).scaled_residual <= 1e-3

    def test_auxiliary_left_polarized_target(self, setup):
        sys, ext, solver, _, f = setup
        x = sys.grid.x
        phi = np.exp(-(((x - 1.5) / 0.1) ** 2))
        y = np.concatenate([phi, -1j * phi])
        y[0] = y[sys.n_points - 1] = 0
        chk = check_auxiliary(f, y, 1.0, ext, solver)
        assert abs(chk.lhs) <= 1e-3 * chk.scale and abs(chk.rhs) <= 1e-3 * chk.scale

    def test_aux1(self, setup):
        sys, ext, solver, y, f = setup
        assert check_aux1(f, y, 1.0, ext, solver).scaled_residual <= 1e-3

    def test_aux1_eigenvector_closed_form(self, setup):
        sys, ext, solver, _, f = setup
        # λ = π on [0, 2]; the discrete eigenspace is doubled by a grid-scale twin, so the
        # smooth eigenvector is the projection of (sin λx, -cos λx) onto it
        lam = np.pi
        spec = ext.spectral
        cols = np.flatnonzero(np.abs(spec.eigenvalues - lam) < 1e-2)
        x = sys.grid.x
        exact = np.concatenate([np.sin(lam * x), -np.cos(lam * x)])
        vecs = spec.eigenvectors[:, cols]
        e = ext.embed(vecs @ (vecs.conj().T @ (ext.weights * ext.restrict(exact))))
        e /= sys.norm(e)
        lam_h = spec.eigenvalues[cols[0]]
        assert np.allclose(ext.embed(ext.reduced_matrix @ ext.restrict(e)), lam_h * e, atol=1e-9)
        chk = check_aux1(f, e, 1.0, ext, solver)
        w_trace = (np.exp(1j * (f.times - 1.0) * lam_h) - 1) / (1j * lam_h) * e[sys.n_points]
        rhs = 1j * integrate_time(w_trace * np.conj(f.samples), f.dt)
        assert chk.rhs == pytest.approx(rhs, abs=1e-12)
        assert chk.scaled_residual <= 1e-3

    def test_aux2(self, setup):
        sys, ext, solver, y, f = setup
        chk = check_aux2(f, y, -0.3, 1.0, ext, solver)
        assert chk.scaled_residual <= 1e-3
        assert chk.terms["residual_minus_i"] > 100 * chk.residual

    def test_aux2_at_zero_reduces(self, setup):
        sys, ext, solver, y, f = setup
        chk = check_aux2(f, y, 0.0, 1.0, ext, solver)
        assert chk.lhs == 0
        # with t = 0: ∫(u, y) = -i ∫ (f, Γ2 w^y(s - T)), the conjugate of the first-kind relation
        a1 = check_aux1(f, y, 1.0, ext, solver)
        assert chk.terms["term_u"] == pytest.approx(np.conj(a1.lhs), abs=1e-12)
        assert -1j * chk.terms["term_f"] == pytest.approx(np.conj(a1.rhs), abs=1e-12)

    @pytest.mark.parametrize("name", ["auxiliary", "aux1", "aux2"])
    def test_second_order(self, name):
        res = []
        for n in (64, 128, 256):
            sys, ext = dirac(n)
            solver = LiftSolver(sys, ext)
            y = admissible_state(sys, np.random.default_rng(7))
            f = ctrl(sys, [Bump(0.45, 0.5)])
            if name == "auxiliary":
                chk = check_auxiliary(f, y, 1.0, ext, solver)
            elif name == "aux1":
                chk = check_aux1(f, y, 1.0, ext, solver)
            else:
                chk = check_aux2(f, y, -0.3, 1.0, ext, solver)
            res.append(chk.scaled_residual)
        h = 2.0 / (np.array([64, 128, 256]) - 1)
        order = np.polyfit(np.log(h), np.log(res), 1)[0]
        assert order == pytest.approx(2.0, abs=0.3)

    def test_rejects_bad_inputs(self, setup):
        sys, ext, solver, y, f = setup
        with pytest.raises(NumericsError):
            check_auxiliary(f, np.ones(sys.state_dim), 1.0, ext, solver)
        with pytest.raises(ValueError):
            check_auxiliary(f, y, 0.5, ext, solver)
        with pytest.raises(ValueError):
            check_aux2(f, y, 0.3, 1.0, ext, solver)

    def test_gamma2_vanishes_for_left_target(self, setup):
        sys, ext, _, _, _ = setup
        x = sys.grid.x
        phi = np.exp(-(((x - 1.5) / 0.1) ** 2))
        y = np.concatenate([phi, -1j * phi])
        y[0] = y[sys.n_points - 1] = 0
        v = propagate(ext, y, 1.0, np.linspace(0, 1, 21))
        assert np.abs(v[:, sys.n_points]).max() <= 1e-3 * phi.max()


class TestProbes:
    def test_decay_probe_bounded(self):
        sys, ext = dirac(128)
        x = sys.grid.x
        phi = np.exp(-(((x - 0.6) / 0.1) ** 2))
        z = np.concatenate([phi, -1j * phi])
        y = z.copy()
        y[0] = y[sys.n_points - 1] = 0
        out = decay_probe(ext, z, y, np.linspace(-3, 0, 7))
        assert out["bounded"]
        assert out["exponential"][0] > out["bound"]

    def test_membership_probe_small_for_unreachable(self):
        sys, ext = dirac(256)
        x = sys.grid.x
        phi = np.exp(-(((x - 1.2) / 0.1) ** 2))
        y = np.concatenate([phi, -1j * phi])
        y[0] = y[sys.n_points - 1] = 0
        assert membership_probe(ext, y, np.linspace(-0.8, 0, 9)) < 1e-3
        r = np.concatenate([phi, 1j * phi])
        r[0] = r[sys.n_points - 1] = 0
        assert membership_probe(ext, r, np.linspace(-1.6, 0, 17)) > 1e-2

    def test_decay_probe_rejects_positive_times(self):
        sys, ext = dirac(64)
        with pytest.raises(ValueError):
            decay_probe(ext, np.zeros(sys.state_dim), np.zeros(sys.state_dim), [0.5])


class TestDeficiency:
    def test_standard_table(self):
        specs = standard_specs()
        assert deficiency_indices(specs["L0"]) == (1, 1)
        assert deficiency_indices(specs["L"]) == (0, 0)
        assert deficiency_indices(specs["L0_D"]) == (0, 1)
        assert deficiency_indices(specs["L0_D_mirror"]) == (1, 0)

    def test_shooting_oracle_on_table(self):
        for spec in standard_specs().values():
            assert shooting_indices(spec) == deficiency_indices(spec)

    def test_polarized_reduction_is_scalar(self):
        e, jr, vr = standard_specs()["L0_D"].reduced()
        assert jr.shape == (1, 1)
        # J restricted to span(1, -i) acts as -i: L0_D = -i d/dx
        assert jr[0, 0] == pytest.approx(-1j)

    def test_random_constant_potentials(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            v = 0.3 * (a + a.conj().T) / 2
            for endpoint in ("zero", "y1", "free"):
                spec = OperatorSpec("random", v, None, endpoint)
                assert deficiency_indices(spec) == shooting_indices(spec)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
    def test_indices_invariants(self, a, d):
        spec = OperatorSpec("diag", np.diag([a, d]), None, "zero")
        n_plus, n_minus = deficiency_indices(spec)
        assert n_plus >= 0 and n_minus >= 0
        assert (n_plus, n_minus) == shooting_indices(spec)

    def test_rejections(self):
        with pytest.raises(ValueError):
            OperatorSpec("bad", np.array([[0, 1], [0, 0]]))
        ramp = np.zeros((5, 2, 2))
        ramp[:, 0, 0] = np.arange(5)
        with pytest.raises(ValueError):
            OperatorSpec("ramp", ramp)
        with pytest.raises(ValueError):
            OperatorSpec("bad", endpoint="neumann")
        with pytest.raises(ValueError):
            standard_specs(np.array([[1.0, 0.5], [0.5, 0.0]]))["L0_D"].reduced()


class TestClassifyPart:
    def test_whole_space_self_adjoint(self):
        sys, _ = dirac(64)
        res = classify_part(sys, node_basis(sys, -1.0), standard_specs()["L"])
        assert res.invariant and (res.n_plus, res.n_minus) == (0, 0)
        assert res.is_maximal and res.in_class_M

    @pytest.mark.parametrize("n", [64, 128, 256])
    def test_predicted_unreachable_part(self, n):
        sys, _ = dirac(n)
        res = classify_part(sys, polarized_basis(sys, LEFT), standard_specs()["L0_D"])
        assert res.invariance_residual <= 10 * sys.grid.h**2
        assert res.invariant
        assert (res.n_plus, res.n_minus) == (0, 1)
        assert res.in_class_M and res.is_maximal

    def test_mirror_part(self):
        sys, _ = dirac(64)
        res = classify_part(sys, polarized_basis(sys, RIGHT), standard_specs()["L0_D_mirror"])
        assert (res.n_plus, res.n_minus) == (1, 0)
        assert res.is_maximal and not res.in_class_M

    def test_not_invariant_subspace(self):
        sys, _ = dirac(64)
        only_first = polarized_basis(sys, (1, 0), 0.3, 1.0)
        res = classify_part(sys, only_first)
        assert not res.invariant
        assert res.n_plus is None and res.in_class_M is None

    def test_class_m_implies_maximal(self):
        sys, _ = dirac(64)
        for name, basis in (("L0_D", polarized_basis(sys, LEFT)), ("L0_D_mirror", polarized_basis(sys, RIGHT))):
            res = classify_part(sys, basis, standard_specs()[name])
            assert (not res.in_class_M) or res.is_maximal

    def test_rejections(self):
        sys, _ = dirac(64)
        with pytest.raises(ValueError):
            classify_part(sys, np.zeros((sys.state_dim, 0)))
        with pytest.raises(ValueError):
            classify_part(sys, np.ones((sys.state_dim, 1)))
