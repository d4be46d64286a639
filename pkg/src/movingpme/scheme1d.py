"""Time steppers for the 1D moving-mesh system.

Each step solves, at the current mesh ``x^n`` and density ``rho^n``::

    M lam = dE/drho
    D v = -dE/dx + (B - E)^T lam
    M (rho^{n+1} - rho^n) / tau = -(B - E) v
    x^{n+1} = x^n + tau v

The implicit variant evaluates ``dE/drho`` at the new state and iterates;
the modified variants let the multiplier live on all knots, which couples
the three blocks into one square system.
"""
from __future__ import annotations

import logging

import numpy as np

from .assembly1d import assemble_system, grad_energy_rho
from .diagnostics import discrete_energy, dissipation, total_mass
from .errors import AssumptionError, ConvergenceError, DomainError, PivotError
from .linalg import DenseFactor, solve_dense_lu, solve_tridiag_spd
from .mesh1d import Mesh1D, State1D, check_assumptions, gauss_legendre
from .model import PmeModel
from .stepping import SchemeConfig, StepReport

log = logging.getLogger(__name__)


def _spd_solve(T, b, flags, name):
    try:
        return solve_tridiag_spd(T, b)
    except PivotError as exc:
        flags.append(f"{name}_singular@{exc.index}")
        return solve_dense_lu(T.todense(), b).x


def _finish(state, new, model, rule, sys_, lam, v, rho_dot, iters, flags, residual=0.0):
    e0 = discrete_energy(state, model, rule)
    e1 = discrete_energy(new, model, rule)
    phi = dissipation(state, v, rule)
    rate = float(sys_.grad_rho @ rho_dot + sys_.grad_x @ v)
    rep = check_assumptions(new)
    if not rep.a1_ok:
        flags.append("A1")
    if not rep.a2_ok:
        flags.append("A2")
    return StepReport(
        lam=lam, v=v, rho_dot=rho_dot, fp_iters=iters,
        energy_before=e0, energy_after=e1, dissipation=phi, energy_rate=rate,
        mass_before=total_mass(state), mass_after=total_mass(new),
        assumptions=rep, flags=flags, residual=residual,
    )


def _advance(state, tau, rho_dot, v):
    return State1D(Mesh1D(state.x + tau * v), state.rho + tau * rho_dot)


def explicit_step(state: State1D, model: PmeModel, cfg: SchemeConfig):
    rule = gauss_legendre(cfg.quad_order)
    sys_ = assemble_system(state, model, rule)
    flags = []
    G = sys_.G
    lam = _spd_solve(sys_.M, sys_.grad_rho, flags, "M")
    v = _spd_solve(sys_.D, -sys_.grad_x + G.T @ lam, flags, "D")
    rho_dot = _spd_solve(sys_.M, -(G @ v), flags, "M")
    new = _advance(state, cfg.tau, rho_dot, v)
    return new, _finish(state, new, model, rule, sys_, lam, v, rho_dot, 1, flags)


def _fixed_point(state, model, cfg, rule, solve_once):
    """Picard iteration on the energy gradient at the new state."""
    rho_k, x_k = state.rho, state.x
    history = []
    for k in range(1, cfg.max_fp_iter + 1):
        try:
            grad = grad_energy_rho(State1D(Mesh1D(x_k), rho_k), model, rule)
        except (AssumptionError, DomainError) as exc:
            raise ConvergenceError(
                f"fixed-point iterate {k} left the admissible set ({exc})", history=history
            ) from exc
        lam, v, rho_dot = solve_once(grad)
        rho_new = state.rho + cfg.tau * rho_dot
        x_new = state.x + cfg.tau * v
        diff = max(np.max(np.abs(rho_new - rho_k), initial=0.0),
                   np.max(np.abs(x_new - x_k)))
        history.append(diff)
        rho_k, x_k = rho_new, x_new
        if diff <= cfg.eps:
            return lam, v, rho_dot, k
    raise ConvergenceError(
        f"fixed-point iteration did not converge in {cfg.max_fp_iter} iterations "
        f"(last update {history[-1]:.3e})",
        history=history,
    )


def implicit_step(state: State1D, model: PmeModel, cfg: SchemeConfig):
    rule = gauss_legendre(cfg.quad_order)
    sys_ = assemble_system(state, model, rule)
    flags = []
    G = sys_.G

    def solve_once(grad):
        lam = _spd_solve(sys_.M, grad, flags, "M")
        v = _spd_solve(sys_.D, -sys_.grad_x + G.T @ lam, flags, "D")
        rho_dot = _spd_solve(sys_.M, -(G @ v), flags, "M")
        return lam, v, rho_dot

    lam, v, rho_dot, iters = _fixed_point(state, model, cfg, rule, solve_once)
    flags = sorted(set(flags))
    new = _advance(state, cfg.tau, rho_dot, v)
    # the energy rate uses the gradient the step actually consumed
    sys_.grad_rho = grad_energy_rho(new, model, rule)
    return new, _finish(state, new, model, rule, sys_, lam, v, rho_dot, iters, flags)


def coupled_matrix(sys_) -> np.ndarray:
    """Square saddle system of the full-multiplier scheme.

    Unknowns are ordered (lam_hat[0..N], v[0..N], rho_dot[1..N-1]).
    """
    Mhat = sys_.Mhat
    Ghat = sys_.Ghat
    D = sys_.D.todense()
    ni, nf = Mhat.shape
    K = np.zeros((ni + 2 * nf, ni + 2 * nf))
    K[:ni, :nf] = Mhat
    K[ni:ni + nf, :nf] = -Ghat.T
    K[ni:ni + nf, nf:2 * nf] = D
    K[ni + nf:, nf:2 * nf] = Ghat
    K[ni + nf:, 2 * nf:] = Mhat.T
    return K


def _coupled_rhs(sys_, grad):
    nf = sys_.grad_x.size
    return np.concatenate([grad, -sys_.grad_x, np.zeros(nf)])


def _split(sol, nf):
    return sol[:nf], sol[nf:2 * nf], sol[2 * nf:]


def modified_explicit_step(state: State1D, model: PmeModel, cfg: SchemeConfig):
    rule = gauss_legendre(cfg.quad_order)
    sys_ = assemble_system(state, model, rule)
    res = solve_dense_lu(coupled_matrix(sys_), _coupled_rhs(sys_, sys_.grad_rho))
    flags = ["rank_deficient"] if res.rank_deficient else []
    lam, v, rho_dot = _split(res.x, state.N + 1)
    new = _advance(state, cfg.tau, rho_dot, v)
    return new, _finish(state, new, model, rule, sys_, lam, v, rho_dot, 1, flags,
                        residual=res.residual)


def modified_implicit_step(state: State1D, model: PmeModel, cfg: SchemeConfig):
    rule = gauss_legendre(cfg.quad_order)
    sys_ = assemble_system(state, model, rule)
    factor = DenseFactor(coupled_matrix(sys_))
    nf = state.N + 1
    residuals = []

    def solve_once(grad):
        res = factor.solve(_coupled_rhs(sys_, grad))
        residuals.append(res.residual)
        return _split(res.x, nf)

    lam, v, rho_dot, iters = _fixed_point(state, model, cfg, rule, solve_once)
    flags = ["rank_deficient"] if factor.rank_deficient else []
    new = _advance(state, cfg.tau, rho_dot, v)
    sys_.grad_rho = grad_energy_rho(new, model, rule)
    return new, _finish(state, new, model, rule, sys_, lam, v, rho_dot, iters, flags,
                        residual=residuals[-1])


STEPPERS = {
    "explicit": explicit_step,
    "implicit": implicit_step,
    "modified-explicit": modified_explicit_step,
    "modified-implicit": modified_implicit_step,
}


def step(state: State1D, model: PmeModel, cfg: SchemeConfig):
    return STEPPERS[cfg.kind](state, model, cfg)


def run(state0: State1D, model: PmeModel, cfg: SchemeConfig, observers=(), **kwargs):
    """March from ``cfg.t0`` to ``cfg.T``; see :func:`movingpme.runner.run`."""
    from .runner import run as _run

    return _run(state0, model, cfg, observers=observers, **kwargs)
