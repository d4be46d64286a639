import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from movingpme.assembly1d import assemble_system
from movingpme.diagnostics import discrete_energy, total_mass
from movingpme.errors import ConvergenceError, DomainError
from movingpme.mesh1d import Mesh1D, State1D, interpolate, uniform_mesh
from movingpme.model import BarenblattParams, PmeModel, barenblatt, barenblatt_support_radius
from movingpme.runner import run
from movingpme.scheme1d import (coupled_matrix, explicit_step, implicit_step,
                                modified_explicit_step, modified_implicit_step, step)
from movingpme.stepping import SchemeConfig

import oracles
from oracles import random_admissible_1d

M2 = PmeModel(2)


def hat():
    return State1D(Mesh1D(np.array([0.0, 1.0, 2.0])), np.array([1.0]))


def cfg(kind="explicit", tau=1e-3, **kw):
    return SchemeConfig(kind=kind, tau=tau, T=kw.pop("T", tau), **kw)


def barenblatt_state(N, m=2, C=1.0, t=1.0):
    p = BarenblattParams(m, 1, C)
    R = barenblatt_support_radius(t, p)
    return interpolate(lambda x: barenblatt(x, t, p), uniform_mesh(-R, R, N))


def test_config_validation():
    with pytest.raises(DomainError):
        SchemeConfig(kind="rk4")
    with pytest.raises(DomainError):
        SchemeConfig(tau=0)
    with pytest.raises(DomainError):
        SchemeConfig(T=0.5, t0=1.0)
    with pytest.raises(DomainError):
        SchemeConfig(eps=0)


def test_hat_explicit_step():
    tau = 1e-3
    new, rep = explicit_step(hat(), M2, cfg(tau=tau))
    assert_allclose(rep.lam, [2.0], atol=1e-12)
    assert_allclose(rep.v, [-4.0, 0.0, 4.0], atol=1e-12)
    assert_allclose(rep.rho_dot, [-4.0], atol=1e-12)
    assert_allclose(new.rho, [1 - 4 * tau], atol=1e-12)
    assert_allclose(new.x, [-4 * tau, 1.0, 2 + 4 * tau], atol=1e-12)
    assert total_mass(new) == pytest.approx(1 - 16 * tau**2, abs=1e-14)


def test_hat_dissipation_and_rate():
    _, rep = explicit_step(hat(), M2, cfg())
    # 1/2 int rho_h v_h^2 with v_h = 4(x - 1) on [0, 2]
    assert rep.dissipation == pytest.approx(4 / 3, rel=1e-12)
    assert rep.energy_rate == pytest.approx(-8 / 3, rel=1e-12)
    assert rep.rate_residual < 1e-12


@pytest.mark.parametrize("stepper", [explicit_step, implicit_step, modified_explicit_step,
                                     modified_implicit_step])
def test_zero_density_is_fixed_point(stepper):
    s = State1D(uniform_mesh(-1, 1, 6), np.zeros(5))
    new, rep = stepper(s, M2, cfg(kind="implicit"))
    assert np.all(new.rho == 0) and np.array_equal(new.x, s.x)
    assert np.all(rep.v == 0)
    if stepper in (implicit_step, modified_implicit_step):
        assert rep.fp_iters == 1


def test_zero_density_modified_step_flags_min_norm():
    s = State1D(uniform_mesh(-1, 1, 6), np.zeros(5))
    _, rep = modified_explicit_step(s, M2, cfg())
    assert any("rank" in f or "min-norm" in f for f in rep.flags)


def _step_gap_slope(s0, a, b, model=M2):
    diffs = []
    for tau in (1e-3, 1e-4):
        e, _ = a(s0, model, cfg(tau=tau))
        i, _ = b(s0, model, cfg(tau=tau, eps=1e-14))
        diffs.append(max(np.max(np.abs(e.rho - i.rho)), np.max(np.abs(e.x - i.x))))
    return math.log10(diffs[0] / diffs[1])


def test_implicit_minus_explicit_is_second_order():
    # for m = 2 the rho-gradient is 2 M rho, which the scheme keeps to first
    # order, so the gap is even O(tau^3); m = 3 shows the generic O(tau^2)
    assert _step_gap_slope(hat(), explicit_step, implicit_step) >= 1.95
    x, rho = random_admissible_1d(np.random.default_rng(11), 7)
    s = State1D(Mesh1D(x), rho)
    slope = _step_gap_slope(s, explicit_step, implicit_step, PmeModel(3))
    assert slope == pytest.approx(2.0, abs=0.1)


def test_modified_implicit_minus_modified_explicit_is_second_order():
    x, rho = random_admissible_1d(np.random.default_rng(5), 8)
    s0 = State1D(Mesh1D(x), rho)
    assert _step_gap_slope(s0, modified_explicit_step, modified_implicit_step) >= 1.95
    slope = _step_gap_slope(s0, modified_explicit_step, modified_implicit_step, PmeModel(3))
    assert slope == pytest.approx(2.0, abs=0.1)


def test_modified_explicit_hat_step():
    # the coupled system is singular here (rank 6 of 7): lam_hat + c (1, -1/2, 1)
    # solves it for every c; the minimum-norm member is (4, 16, 4)/9
    _, base = explicit_step(hat(), M2, cfg())
    _, rep = modified_explicit_step(hat(), M2, cfg())
    assert_allclose(rep.v, base.v, atol=1e-10)
    assert_allclose(rep.rho_dot, base.rho_dot, atol=1e-10)
    assert_allclose(rep.lam, [4 / 9, 16 / 9, 4 / 9], atol=1e-10)
    assert_allclose(np.array([1 / 6, 2 / 3, 1 / 6]) @ rep.lam, 4 / 3, atol=1e-12)
    assert rep.flags


def test_coupled_system_shape_and_null_direction():
    K = coupled_matrix(assemble_system(hat(), M2))
    assert K.shape == (7, 7)
    assert np.linalg.matrix_rank(K) == 6
    null = np.zeros(7)
    null[:3] = [1.0, -0.5, 1.0]
    assert_allclose(K @ null, 0, atol=1e-14)


def test_modified_mass_law_small_tau():
    s0 = hat()
    new, _ = modified_explicit_step(s0, M2, cfg(tau=1e-5))
    assert abs(total_mass(new) - total_mass(s0)) <= 1e-8


def test_explicit_step_solves_are_exact():
    rng = np.random.default_rng(7)
    x, rho = random_admissible_1d(rng, 9)
    s = State1D(Mesh1D(x), rho)
    S = assemble_system(s, PmeModel(3))
    _, rep = explicit_step(s, PmeModel(3), cfg())
    M, D, G = S.M.todense(), S.D.todense(), S.G
    r1 = M @ rep.lam - S.grad_rho
    r2 = D @ rep.v - (-S.grad_x + G.T @ rep.lam)
    r3 = M @ rep.rho_dot + G @ rep.v
    for r, b in ((r1, S.grad_rho), (r2, S.grad_x), (r3, G @ rep.v)):
        assert np.linalg.norm(r) < 1e-12 * max(np.linalg.norm(b), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.sampled_from([2, 3, 4]))
def test_explicit_step_matches_dense_oracle(seed, N, m):
    x, rho = random_admissible_1d(np.random.default_rng(seed), N)
    s = State1D(Mesh1D(x), rho)
    lam, v, rho_dot = oracles.explicit_step_1d_dense(oracles.assemble_1d(x, rho, m))
    _, rep = explicit_step(s, PmeModel(m), cfg())
    assert np.max(np.abs(rep.lam - lam)) < 1e-10 * max(1, np.abs(lam).max())
    assert np.max(np.abs(rep.v - v)) < 1e-10 * max(1, np.abs(v).max())
    assert np.max(np.abs(rep.rho_dot - rho_dot)) < 1e-10 * max(1, np.abs(rho_dot).max())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 15))
def test_mass_vector_step_identity(seed, N):
    x, rho = random_admissible_1d(np.random.default_rng(seed), N)
    s = State1D(Mesh1D(x), rho)
    tau = 1e-4
    S = assemble_system(s, M2)
    new, rep = explicit_step(s, M2, cfg(tau=tau))
    M = S.M.todense()
    assert_allclose(M @ new.rho - M @ s.rho, -tau * S.G @ rep.v, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 15), st.sampled_from([2, 3, 5]))
def test_explicit_energy_rate_identity(seed, N, m):
    x, rho = random_admissible_1d(np.random.default_rng(seed), N)
    _, rep = explicit_step(State1D(Mesh1D(x), rho), PmeModel(m), cfg())
    assert rep.rate_residual < 1e-10


def test_implicit_energy_decreases_on_barenblatt():
    s = barenblatt_state(24)
    c = cfg(kind="implicit", tau=1e-2)
    for _ in range(20):
        new, rep = implicit_step(s, M2, c)
        assert rep.energy_after <= rep.energy_before + 1e-10 * abs(rep.energy_before)
        assert discrete_energy(new, M2) == pytest.approx(rep.energy_after, rel=1e-12)
        s = new


def test_modified_implicit_energy_monitored():
    s = barenblatt_state(16)
    rec = run(s, M2, SchemeConfig("modified-implicit", 1e-2, 1.1, 1.0), keep_reports=True)
    energies = [r.energy for r in rec.rows]
    assert all(b <= a + 1e-10 * abs(a) for a, b in zip(energies, energies[1:]))


def test_implicit_nonconvergence_reports_history():
    s = barenblatt_state(12)
    with pytest.raises(ConvergenceError) as exc:
        implicit_step(s, M2, cfg(kind="implicit", tau=0.5, max_fp_iter=2, eps=1e-14))
    assert len(exc.value.history) >= 1


def test_step_dispatches_on_kind():
    for kind in ("explicit", "implicit", "modified-explicit", "modified-implicit"):
        new, rep = step(hat(), M2, cfg(kind=kind))
        assert new.rho[0] == pytest.approx(1 - 4e-3, abs=1e-4)


def test_run_zero_length():
    rec = run(hat(), M2, SchemeConfig("explicit", 1e-2, 1.0, 1.0))
    assert len(rec.rows) == 1 and rec.t_final == 1.0


def test_run_barenblatt_boundary_tracks_exact_radius():
    p = BarenblattParams(2, 1, 1.0)
    s0 = barenblatt_state(48)
    rec = run(s0, M2, SchemeConfig("implicit", 1 / 1600, 2.0, 1.0))
    R2 = barenblatt_support_radius(2.0, p)
    assert R2 == pytest.approx(math.sqrt(12) * 2 ** (1 / 3))
    x = rec.final_state.x
    assert abs(x[-1] - R2) < 0.02 * R2 and abs(x[0] + R2) < 0.02 * R2
    assert rec.stop_reason == "completed"
    times = [r.t for r in rec.rows]
    assert all(b >= a for a, b in zip(times, times[1:]))
