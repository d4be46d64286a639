import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from movingpme.errors import DomainError
from movingpme.mesh1d import (Mesh1D, State1D, best_fit_mesh, check_assumptions, eval_psi,
                              eval_rho, gauss_legendre, integrate_cell, interpolate,
                              uniform_mesh)
from movingpme.model import BarenblattParams, barenblatt

from oracles import random_admissible_1d


def hat_state(knots=(0.0, 1.0, 2.0), rho=(1.0,)):
    return State1D(Mesh1D(np.array(knots)), np.array(rho))


def test_eval_rho_examples():
    s = hat_state()
    assert eval_rho(s, 0.5) == pytest.approx(0.5)
    assert eval_rho(s, 2.0) == 0.0
    assert eval_rho(hat_state((0, 0.4, 1), (2.0,)), 0.7) == pytest.approx(1.0)


def test_eval_rho_outside_mesh():
    with pytest.raises(DomainError):
        eval_rho(hat_state(), 2.5)


def test_eval_psi_examples():
    s = hat_state()
    assert eval_psi(s, 1, 1.0) == pytest.approx(-1.0)
    for x in (0.0, 0.3, 0.8):
        assert eval_psi(s, 0, x) == pytest.approx(-(1 - x))
    assert eval_psi(s, 0, 1.5) == 0.0
    z = State1D(uniform_mesh(0, 1, 5), np.zeros(4))
    assert all(eval_psi(z, i, x) == 0 for i in range(6) for x in np.linspace(0, 1, 7))


def test_eval_psi_index_range():
    with pytest.raises(DomainError):
        eval_psi(hat_state(), 3, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_psi_is_knot_derivative_of_rho(seed, N):
    rng = np.random.default_rng(seed)
    x, rho = random_admissible_1d(rng, N)
    s = State1D(Mesh1D(x), rho)
    i = int(rng.integers(0, N + 1))
    cell = min(max(i - 1 + int(rng.integers(0, 2)), 0), N - 1)
    pt = x[cell] + rng.uniform(0.2, 0.8) * (x[cell + 1] - x[cell])
    d = 1e-7 * np.min(np.diff(x))
    xp, xm = x.copy(), x.copy()
    xp[i] += d
    xm[i] -= d
    fd = (eval_rho(State1D(Mesh1D(xp), rho), pt) - eval_rho(State1D(Mesh1D(xm), rho), pt)) / (2 * d)
    assert eval_psi(s, i, pt) == pytest.approx(fd, rel=1e-5, abs=1e-7)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_psi_product_form(seed, N):
    rng = np.random.default_rng(seed)
    x, rho = random_admissible_1d(rng, N)
    s = State1D(Mesh1D(x), rho)
    r = s.nodal()
    for c in range(N):
        pt = x[c] + rng.uniform(0.01, 0.99) * (x[c + 1] - x[c])
        slope = (r[c + 1] - r[c]) / (x[c + 1] - x[c])
        phi_left = (x[c + 1] - pt) / (x[c + 1] - x[c])
        assert eval_psi(s, c, pt) == pytest.approx(-slope * phi_left, rel=1e-13, abs=1e-15)
        assert eval_psi(s, c + 1, pt) == pytest.approx(-slope * (1 - phi_left), rel=1e-13, abs=1e-15)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(2, 15))
def test_eval_rho_reproduces_knot_values(seed, N):
    x, rho = random_admissible_1d(np.random.default_rng(seed), N)
    s = State1D(Mesh1D(x), rho)
    assert_allclose([eval_rho(s, xi) for xi in x], s.nodal(), rtol=0, atol=1e-15)


def test_integrate_cell():
    mesh = Mesh1D(np.array([0.0, 1.0, 3.0]))
    assert integrate_cell(mesh, 1, lambda x: x, gauss_legendre(2)) == pytest.approx(0.5)
    assert integrate_cell(mesh, 1, lambda x: x**3, gauss_legendre(2)) == pytest.approx(0.25)



def test_integrate_cell_fractional_power():
    # x^4.5 is only C^4 at 0: five points reach 4.5e-8, ten points reach 1e-10
    mesh = Mesh1D(np.array([0.0, 1.0, 3.0]))
    g = lambda x: x**4.5
    assert integrate_cell(mesh, 1, g, gauss_legendre(5)) == pytest.approx(1 / 5.5, abs=5e-8)
    assert integrate_cell(mesh, 1, g, gauss_legendre(10)) == pytest.approx(1 / 5.5, abs=1e-10)


@pytest.mark.parametrize("order", [1, 2, 3, 5, 8])
def test_quadrature_rule_properties(order):
    rule = gauss_legendre(order)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for deg in range(2 * order):
        assert rule.weights @ rule.nodes**deg == pytest.approx(1 / (deg + 1), abs=1e-13)


def test_check_assumptions():
    rep = check_assumptions(hat_state())
    assert rep.a1_ok and rep.a2_ok
    rep = check_assumptions(State1D(Mesh1D(np.array([0.0, 1.0, 0.5])), np.array([1.0])))
    assert not rep.a1_ok
    rep = check_assumptions(hat_state(rho=(-1e-9,)))
    assert not rep.a2_ok and rep.min_rho == -1e-9


def test_uniform_mesh():
    assert_allclose(uniform_mesh(0, 1, 2).knots, [0, 0.5, 1])
    assert_allclose(uniform_mesh(-math.pi, 0, 4).knots, -math.pi * np.array([1, 0.75, 0.5, 0.25, 0]),
                    atol=1e-15)
    r = 2 * math.sqrt(3)
    m = uniform_mesh(-r, r, 12)
    assert m.knots.size == 13
    assert_allclose(np.diff(m.knots), 4 * math.sqrt(3) / 12)


@pytest.mark.parametrize("a,b,N", [(1, 0, 4), (0, 0, 4), (0, 1, 1)])
def test_uniform_mesh_rejects(a, b, N):
    with pytest.raises(DomainError):
        uniform_mesh(a, b, N)


def test_interpolate_matches_nodes():
    p = BarenblattParams(2, 1, 1.0)
    s = interpolate(lambda x: barenblatt(x, 1.0, p), uniform_mesh(-3.4, 3.4, 10))
    assert_allclose(s.rho, barenblatt(s.x[1:-1], 1.0, p))


def test_best_fit_representable_hat():
    f = lambda x: np.maximum(0.0, np.where(x < 0.3, x / 0.3, (1 - x) / 0.7))
    fit = best_fit_mesh(f, (0.0, 1.0), 2)
    assert fit.mesh.knots[1] == pytest.approx(0.3, abs=1e-6)
    assert fit.error < 1e-10


def test_best_fit_beats_uniform_on_barenblatt():
    p = BarenblattParams(2, 1, 1.0)
    R = math.sqrt(12)
    fit = best_fit_mesh(lambda x: barenblatt(x, 1.0, p), (-R, R), 12)
    uniform_err = fit.history[0]
    assert fit.error < uniform_err
    assert all(b <= a for a, b in zip(fit.history, fit.history[1:]))
    assert np.all(np.diff(fit.mesh.knots) > 0)
    assert fit.mesh.knots[0] == -R and fit.mesh.knots[-1] == R


def test_best_fit_zero_target():
    fit = best_fit_mesh(lambda x: np.zeros_like(x), (0.0, 2.0), 5)
    assert_allclose(fit.mesh.knots, uniform_mesh(0, 2, 5).knots)
    assert np.all(fit.coef == 0) and fit.error == 0


def test_best_fit_respects_min_gap():
    p = BarenblattParams(5, 1, 1.0)
    R = float(np.sqrt(1 / p.k))
    gap = 1e-4
    fit = best_fit_mesh(lambda x: barenblatt(x, 1.0, p), (-R, R), 16, min_gap=gap)
    assert np.min(np.diff(fit.mesh.knots)) >= gap * (1 - 1e-9)
    with pytest.raises(DomainError):
        best_fit_mesh(lambda x: barenblatt(x, 1.0, p), (-R, R), 16, min_gap=R)
