import math

import numpy as np
import pytest
from conftest import random_state
from oracles import aligned_solution, shear_solution

from mhd2d import Grid, MHDState, differentiate, divergence, inner, leray_project, mollify, norm
from mhd2d.config import parse_config
from mhd2d.ic import ICSpec, make_ic
from mhd2d.snapshot import read_state
from mhd2d.solver import (
    CFLError, SolverError, SolverOptions, advective_terms, cfl_limit, integrator, pressure_recover,
    regularized_rhs, rhs, run, step, unprojected_momentum_rhs,
)
from mhd2d.studies import fitted_order, integrate


def nonlinear_part(state):
    du, db = rhs(state)
    lu, lb = rhs(state, nonlinear=False)
    return du - lu, db - lb


def config(text=""):
    return parse_config("[mhd2d]\nversion = 1\n" + text)


class TestOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolverOptions(dt=0)
        with pytest.raises(ValueError):
            SolverOptions(scheme="RK3")
        with pytest.raises(ValueError):
            SolverOptions(mode="regularized")
        with pytest.raises(ValueError):
            SolverOptions(dt=0.3, t_end=1.0).n_steps

    def test_whole_steps(self):
        assert SolverOptions(dt=1e-3, t_end=1.0).n_steps == 1000

    def test_cfl_limit(self):
        g = Grid(64)
        assert cfl_limit(g, 0.0, 0.0) == pytest.approx(0.5 * g.dx)
        assert cfl_limit(g, 2.0, 1.0) == pytest.approx(0.5 * g.dx / 4)


class TestRhs:
    def test_zero_state(self, grid32):
        du, db = rhs(MHDState.zeros(grid32))
        assert norm(du) == 0 and norm(db) == 0

    def test_shear(self, grid32):
        x1, x2 = grid32.x
        u = np.stack([np.sin(x2), np.zeros_like(x2)])
        du, db = rhs(MHDState.from_physical(grid32, u, np.zeros_like(u)))
        np.testing.assert_allclose(du.to_physical(), -u, atol=1e-13)
        assert norm(db) < 1e-13

    def test_aligned_fields_have_no_nonlinear_term(self, grid32):
        u = aligned_solution(*grid32.x, 0.0)
        nu, nb = nonlinear_part(MHDState.from_physical(grid32, u, u))
        assert norm(nu) < 1e-13 and norm(nb) < 1e-13

    def test_aligned_rhs_is_time_derivative_of_closed_form(self, grid32):
        x1, x2 = grid32.x
        u = aligned_solution(x1, x2, 0.3)
        du, db = rhs(MHDState.from_physical(grid32, u, u))
        h = 1e-4
        fd = (aligned_solution(x1, x2, 0.3 + h) - aligned_solution(x1, x2, 0.3 - h)) / (2 * h)
        np.testing.assert_allclose(du.to_physical(), fd, atol=1e-7)
        np.testing.assert_allclose(db.to_physical(), fd, atol=1e-7)

    def test_matches_advective_form(self, grid64):
        s = random_state(grid64, seed=5, amplitude=1.0)
        adv = advective_terms(s)
        nu, nb = nonlinear_part(s)
        want_u = leray_project(adv["b.grad b"] - adv["u.grad u"])
        want_b = adv["b.grad u"] - adv["u.grad b"]
        scale = norm(adv["u.grad u"])
        assert norm(nu - want_u) < 1e-12 * scale
        assert norm(nb - want_b) < 1e-12 * scale

    def test_nonlinear_terms_conserve_energy(self, grid64):
        for seed in range(5):
            s = random_state(grid64, seed=seed, amplitude=1.0)
            nu, nb = nonlinear_part(s)
            scale = norm(s.u) ** 2 * norm(nu)
            assert abs(inner(s.u, nu) + inner(s.b, nb)) < 1e-12 * scale

    def test_linear_coupling_is_skew(self, grid64):
        s = random_state(grid64, seed=2, amplitude=1.0)
        du, db = rhs(s, nonlinear=False)
        lap_u = differentiate(s.u, 1, 2) + differentiate(s.u, 2, 2)
        lap_b = differentiate(s.b, 1, 2) + differentiate(s.b, 2, 2)
        ediss = inner(s.u, lap_u) + inner(s.b, lap_b)
        assert inner(s.u, du) + inner(s.b, db) == pytest.approx(ediss, rel=1e-12)

    def test_rhs_is_divergence_free(self, grid64):
        du, db = rhs(random_state(grid64, seed=1, amplitude=1.0))
        for v in (du, db):
            assert np.max(np.abs(divergence(v).coeffs)) < 1e-12

    def test_pressure_closes_momentum_equation(self, grid64):
        s = random_state(grid64, seed=4, amplitude=1.0)
        p = pressure_recover(s)
        grad_p = type(s.u)((differentiate(p, 1), differentiate(p, 2)))
        du, _ = rhs(s)
        assert norm(unprojected_momentum_rhs(s) - grad_p - du) < 1e-12 * norm(du)
        assert p.coeffs[0, 0] == 0

    def test_pressure_of_shear_vanishes(self, grid32):
        x1, x2 = grid32.x
        u = np.stack([np.sin(x2), np.zeros_like(x2)])
        assert norm(pressure_recover(MHDState.from_physical(grid32, u, np.zeros_like(u)))) < 1e-13


class TestRegularizedRhs:
    def test_structure(self, grid64):
        s = random_state(grid64, seed=6, amplitude=1.0)
        eps = 0.2
        lu, lb = rhs(s, nonlinear=False)
        smooth = MHDState(mollify(s.u, eps), mollify(s.b, eps))
        nu, nb = nonlinear_part(smooth)
        ru, rb = regularized_rhs(s, eps)
        assert norm(ru - leray_project(mollify(lu + nu, eps))) < 1e-12 * norm(ru)
        assert norm(rb - leray_project(mollify(lb + nb, eps))) < 1e-12 * norm(rb)

    def test_approaches_exact_rhs(self, grid64):
        s = random_state(grid64, seed=6, amplitude=1.0)
        du, db = rhs(s)
        errs = []
        for eps in (0.2, 0.1, 0.05):
            ru, rb = regularized_rhs(s, eps)
            errs.append(math.hypot(norm(ru - du), norm(rb - db)))
        assert errs[0] > errs[1] > errs[2]

    def test_rejects_wrapping_scale(self, grid32):
        with pytest.raises(ValueError):
            regularized_rhs(MHDState.zeros(grid32), 2.0)


class TestStepping:
    def test_linear_flow_is_exact(self, grid32):
        s = random_state(grid32, seed=7, amplitude=1.0)
        out = integrate(s, SolverOptions(dt=0.025, nonlinear=False), 1.0)
        g = grid32
        zp, zm = s.u + s.b, s.u - s.b
        ep = np.exp((-g.xi_sq + 1j * g.xi1 * g.nyquist_free) * 1.0)
        em = np.exp((-g.xi_sq - 1j * g.xi1 * g.nyquist_free) * 1.0)
        np.testing.assert_allclose((out.u + out.b).coeffs, ep * zp.coeffs, atol=1e-14)
        np.testing.assert_allclose((out.u - out.b).coeffs, em * zm.coeffs, atol=1e-14)

    @pytest.mark.parametrize("scheme", ["IF-RK2", "IF-RK4"])
    def test_shear_closed_form(self, grid32, scheme):
        s = make_ic(ICSpec("shear", amplitude=1.0), grid32)
        out = integrate(s, SolverOptions(dt=0.01, scheme=scheme), 1.0)
        _, x2 = grid32.x
        np.testing.assert_allclose(out.u.to_physical()[0], shear_solution(x2, 1.0), atol=1e-13)
        assert norm(out.b) < 1e-13

    @pytest.mark.parametrize("scheme", ["IF-RK2", "IF-RK4"])
    def test_aligned_closed_form(self, grid32, scheme):
        s = make_ic(ICSpec("elsasser_aligned", amplitude=1.0), grid32)
        out = integrate(s, SolverOptions(dt=0.01, scheme=scheme), 0.5)
        want = aligned_solution(*grid32.x, 0.5)
        np.testing.assert_allclose(out.u.to_physical(), want, atol=1e-12)
        np.testing.assert_allclose(out.b.to_physical(), want, atol=1e-12)

    @pytest.mark.parametrize("scheme,order", [("IF-RK2", 2), ("IF-RK4", 4)])
    def test_temporal_order(self, grid32, scheme, order):
        s = random_state(grid32, seed=8, amplitude=2.0)
        ref = integrate(s, SolverOptions(dt=5e-4, scheme="IF-RK4"), 0.2)
        dts = (0.01, 0.005, 0.0025)
        errs = []
        for dt in dts:
            out = integrate(s, SolverOptions(dt=dt, scheme=scheme), 0.2)
            errs.append(math.hypot(norm(out.u - ref.u), norm(out.b - ref.b)))
        assert fitted_order(dts, errs) == pytest.approx(order, abs=0.3)

    def test_divergence_and_mean_preserved(self, grid32):
        s = random_state(grid32, seed=9, amplitude=2.0)
        out = integrate(s, SolverOptions(dt=5e-3), 0.5)
        for v in (out.u, out.b):
            assert np.max(np.abs(divergence(v).coeffs)) < 1e-13
            assert np.max(np.abs(v.coeffs[:, 0, 0])) < 1e-15

    def test_step_advances_time(self, small_state):
        out = step(small_state, SolverOptions(dt=0.01))
        assert out.time == pytest.approx(0.01)

    def test_cfl_violation_reports_admissible_dt(self, grid32):
        s = random_state(grid32, seed=1, amplitude=5.0)
        opts = SolverOptions(dt=0.5)
        with pytest.raises(CFLError) as info:
            integrate(s, opts, 1.0)
        assert 0 < info.value.dt_max < 0.5
        assert "admissible" in str(info.value)

    def test_non_finite_input_aborts(self, grid32, small_state):
        z = small_state.to_half()
        z[0, 1, 1] = np.nan
        with pytest.raises(SolverError, match="non-finite"):
            integrator(grid32, SolverOptions(dt=1e-3)).step(z)


class TestRun:
    TEXT = """
[grid]
n = 32
[ic]
kind = random_spectrum
amplitude = 0.5
seed = 11
[solver]
dt = 0.002
t_end = {t_end}
[diagnostics]
cadence = 10
[output]
checkpoint_every = 100
"""

    def test_records_and_states(self):
        traj = run(config(self.TEXT.format(t_end=0.2)))
        assert len(traj.records) == 11
        np.testing.assert_allclose(traj.times, np.linspace(0, 0.2, 11), atol=1e-12)
        assert traj.final.time == pytest.approx(0.2)
        assert np.all(np.diff(traj.l2_norms) < 0)

    def test_zero_duration(self):
        traj = run(config(self.TEXT.format(t_end=0)))
        assert len(traj.records) == 1 and len(traj.states) == 1

    def test_restart_is_bit_identical(self, tmp_path):
        cfg = config(self.TEXT.format(t_end=0.4))
        full = run(cfg, out_dir=tmp_path / "a")
        resumed = run(cfg, restart=tmp_path / "a" / "checkpoint_00000100.mhd2", out_dir=tmp_path / "b")
        np.testing.assert_array_equal(resumed.final.to_half(), full.final.to_half())
        assert resumed.records[-1].energy == full.records[-1].energy
        a, b = read_state(tmp_path / "a" / "final.mhd2"), read_state(tmp_path / "b" / "final.mhd2")
        np.testing.assert_array_equal(a.physical(), b.physical())

    def test_restart_rejects_other_physics(self, tmp_path):
        run(config(self.TEXT.format(t_end=0.4)), out_dir=tmp_path)
        other = config(self.TEXT.format(t_end=0.4).replace("seed = 11", "seed = 12"))
        with pytest.raises(SolverError, match="different configuration"):
            run(other, restart=tmp_path / "checkpoint_00000100.mhd2")

    def test_restart_rejects_plain_snapshot(self, tmp_path):
        run(config(self.TEXT.format(t_end=0.2)), out_dir=tmp_path)
        with pytest.raises(SolverError, match="plain snapshot"):
            run(config(self.TEXT.format(t_end=0.4)), restart=tmp_path / "final.mhd2")

    def test_failure_flushes_partial_output(self, tmp_path):
        cfg = config(self.TEXT.format(t_end=1.0).replace("amplitude = 0.5", "amplitude = 40").replace("dt = 0.002", "dt = 0.02"))
        with pytest.raises(SolverError) as info:
            run(cfg, out_dir=tmp_path)
        assert info.value.trajectory is not None
        assert (tmp_path / "diagnostics.csv").exists()
