"""Moving P1 mesh on an interval.

The density is ``rho_h = sum_i rho_i phi_i`` over interior knots only; the
two end knots are the free boundary and carry ``rho = 0``.  Moving knot
``x_i`` changes ``rho_h`` at a fixed point by ``psi_i = -(d rho_h/dx) phi_i``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import solveh_banded

from .errors import DomainError

log = logging.getLogger(__name__)


@dataclass
class Mesh1D:
    knots: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        if self.knots.ndim != 1 or self.knots.size < 3:
            raise DomainError("a 1D mesh needs at least 3 knots (N >= 2)")

    @property
    def N(self) -> int:
        return self.knots.size - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.knots)


@dataclass
class State1D:
    mesh: Mesh1D
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != (self.mesh.N - 1,):
            raise DomainError(
                f"expected {self.mesh.N - 1} interior values, got {self.rho.shape}"
            )

    @property
    def x(self) -> np.ndarray:
        return self.mesh.knots

    @property
    def N(self) -> int:
        return self.mesh.N

    def nodal(self) -> np.ndarray:
        """Nodal values including the zero boundary values."""
        out = np.zeros(self.N + 1)
        out[1:-1] = self.rho
        return out

    def copy(self) -> "State1D":
        return State1D(Mesh1D(self.x.copy()), self.rho.copy())


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on the reference interval [0, 1]."""

    order: int
    nodes: np.ndarray = field(repr=False, compare=False)
    weights: np.ndarray = field(repr=False, compare=False)


@lru_cache(maxsize=None)
def gauss_legendre(order: int = 5) -> QuadratureRule:
    if order < 1:
        raise DomainError("quadrature order must be positive")
    t, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (t + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(order, nodes, weights)


def _locate(mesh: Mesh1D, x: float) -> int:
    """Cell index c (0-based, cell spans knots c and c+1) containing x.

    An interior knot belongs to the cell on its left, so the one-sided
    quantities (slopes, psi) at a knot are the left limits.
    """
    knots = mesh.knots
    if x < knots[0] or x > knots[-1]:
        raise DomainError(f"x={x} outside mesh [{knots[0]}, {knots[-1]}]")
    c = int(np.searchsorted(knots, x, side="left")) - 1
    return min(max(c, 0), mesh.N - 1)


def eval_rho(state: State1D, x: float) -> float:
    c = _locate(state.mesh, x)
    nod = state.nodal()
    xl, xr = state.x[c], state.x[c + 1]
    s = (x - xl) / (xr - xl)
    return float((1 - s) * nod[c] + s * nod[c + 1])


def eval_psi(state: State1D, i: int, x: float) -> float:
    """Mesh-derivative function ``d rho_h / d x_i`` evaluated at ``x``."""
    if not 0 <= i <= state.N:
        raise DomainError(f"knot index {i} out of range 0..{state.N}")
    c = _locate(state.mesh, x)
    if c not in (i - 1, i):
        return 0.0
    nod = state.nodal()
    xl, xr = state.x[c], state.x[c + 1]
    slope = (nod[c + 1] - nod[c]) / (xr - xl)
    s = (x - xl) / (xr - xl)
    phi = s if c == i - 1 else 1 - s
    return float(-slope * phi)


def integrate_cell(mesh: Mesh1D, i: int, integrand, rule: QuadratureRule | None = None) -> float:
    """Integrate ``integrand(x)`` over cell ``i`` (1-based, ``[x_{i-1}, x_i]``)."""
    rule = rule or gauss_legendre()
    if not 1 <= i <= mesh.N:
        raise DomainError(f"cell index {i} out of range 1..{mesh.N}")
    a, b = mesh.knots[i - 1], mesh.knots[i]
    xq = a + (b - a) * rule.nodes
    return float((b - a) * np.dot(rule.weights, integrand(xq)))


@dataclass(frozen=True)
class AssumptionReport:
    a1_ok: bool
    a2_ok: bool
    min_cell: float
    min_rho: float

    @property
    def ok(self) -> bool:
        return self.a1_ok and self.a2_ok


def check_assumptions(state) -> AssumptionReport:
    """Report knot ordering and density sign without touching the state."""
    h = np.diff(state.x)
    min_rho = float(state.rho.min()) if state.rho.size else 0.0
    min_cell = float(h.min())
    return AssumptionReport(bool(min_cell > 0), bool(min_rho >= 0), min_cell, min_rho)


def uniform_mesh(a: float, b: float, N: int) -> Mesh1D:
    if not a < b:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    if N < 2:
        raise DomainError(f"need N >= 2 cells, got {N}")
    return Mesh1D(np.linspace(a, b, N + 1))


def interpolate(f, mesh: Mesh1D) -> State1D:
    """Nodal interpolant of ``f`` with the boundary values forced to zero."""
    return State1D(mesh, np.asarray(f(mesh.knots[1:-1]), dtype=float))


def _ls_fit(f, knots, rule):
    """Least-squares coefficients on fixed knots and the per-cell squared error."""
    h = np.diff(knots)
    s = rule.nodes
    xq = knots[:-1, None] + h[:, None] * s[None, :]
    fq = f(xq)
    w = rule.weights
    # load vector int f phi_i, interior i
    left = h * ((fq * (1 - s)) @ w)   # contributes to the cell's left knot
    right = h * ((fq * s) @ w)        # contributes to the cell's right knot
    load = right[:-1] + left[1:]
    ab = np.zeros((2, h.size - 1))
    ab[1] = (h[:-1] + h[1:]) / 3
    ab[0, 1:] = h[1:-1] / 6
    if load.size > 1:
        coef = solveh_banded(ab, load)
    else:
        coef = load / ab[1]     # LAPACK's banded path rejects 1x1 systems
    nod = np.concatenate([[0.0], coef, [0.0]])
    fh = nod[:-1, None] * (1 - s) + nod[1:, None] * s
    cell_err = h * (((fq - fh) ** 2) @ w)
    return coef, cell_err


def _ls_knot_gradient(f, knots, coef, rule):
    """Derivative of the squared fit error with respect to each knot.

    The coefficients are optimal, so only the explicit dependence counts:
    moving knot i changes the fit by ``-(d f_h/dx) phi_i``.
    """
    h = np.diff(knots)
    s, w = rule.nodes, rule.weights
    xq = knots[:-1, None] + h[:, None] * s[None, :]
    nod = np.concatenate([[0.0], coef, [0.0]])
    gap = f(xq) - (nod[:-1, None] * (1 - s) + nod[1:, None] * s)
    slope = np.diff(nod) / h
    g = np.zeros(knots.size)
    g[:-1] += 2 * h * slope * ((gap * (1 - s)) @ w)
    g[1:] += 2 * h * slope * ((gap * s) @ w)
    return g


def _polish(f, knots, rule, max_iter, min_gap):
    """Quasi-Newton descent on the cell widths, kept at least ``min_gap``.

    Widths are ``min_gap + (L - N min_gap) softmax(z)``, so ordering, the end
    knots and the safeguard hold for every trial point.
    """
    from scipy.optimize import minimize
    from scipy.special import softmax

    a, L = knots[0], knots[-1] - knots[0]
    n = knots.size - 1
    free = L - n * min_gap

    def unpack(z):
        h = min_gap + free * softmax(z)
        return np.concatenate([[a], a + np.cumsum(h)[:-1], [knots[-1]]])

    def fun(z):
        x = unpack(z)
        coef, cell = _ls_fit(f, x, rule)
        gx = _ls_knot_gradient(f, x, coef, rule)
        # x_i = a + sum_{j<i} h_j for interior i
        gh = np.concatenate([np.cumsum(gx[1:-1][::-1])[::-1], [0.0]])
        sm = softmax(z)
        return cell.sum(), free * sm * (gh - sm @ gh)

    z0 = np.log(np.maximum(np.diff(knots) - min_gap, 1e-300))
    res = minimize(fun, z0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-14})
    return unpack(res.x)


def _equidistribute(knots, cell_err, min_gap, p=5.0):
    """Knots that equalise the modelled error ``(e_i^2)^(1/p)`` across cells."""
    h = np.diff(knots)
    dens = np.maximum(cell_err, 0.0) ** (1.0 / p) / h
    # floor keeps the cumulative map invertible where the error is ~0
    dens = np.maximum(dens, 1e-3 * dens.max())
    cum = np.concatenate([[0.0], np.cumsum(dens * h)])
    targets = np.linspace(0.0, cum[-1], knots.size)
    new = np.interp(targets, cum, knots)
    return _enforce_gap(new, min_gap)


def _enforce_gap(knots, min_gap):
    new = knots.copy()
    n = new.size - 1
    for i in range(1, n):
        new[i] = max(new[i], new[i - 1] + min_gap)
    for i in range(n - 1, 0, -1):
        new[i] = min(new[i], new[i + 1] - min_gap)
    return new


@dataclass
class BestFit:
    mesh: Mesh1D
    coef: np.ndarray
    error: float
    history: list
    converged: bool


def best_fit_mesh(f, support, N: int, max_iter: int = 200, tol: float = 1e-10,
                  quad_order: int = 10, min_gap: float | None = None) -> BestFit:
    """Free-knot least-squares piecewise-linear fit with zero end values.

    Alternates a tridiagonal normal-equation solve for the coefficients with
    a knot redistribution that equidistributes the per-cell error.  A
    redistribution is only accepted when it lowers the total error, with the
    step halved otherwise, so the recorded error history is non-increasing.
    """
    a, b = map(float, support)
    mesh = uniform_mesh(a, b, N)
    rule = gauss_legendre(quad_order)
    if min_gap is None:
        min_gap = 1e-3 * (b - a) / N
    if not 0 < min_gap * N < (b - a):
        raise DomainError(f"min_gap {min_gap} incompatible with {N} cells on [{a}, {b}]")
    knots = mesh.knots
    coef, cell_err = _ls_fit(f, knots, rule)
    err = float(np.sqrt(cell_err.sum()))
    history = [err]
    if err == 0.0:
        return BestFit(mesh, coef, 0.0, history, True)
    converged = False
    for _ in range(max_iter):
        target = _equidistribute(knots, cell_err, min_gap)
        step = 1.0
        accepted = False
        while step > 1e-4:
            trial = _enforce_gap(knots + step * (target - knots), min_gap)
            t_coef, t_cell = _ls_fit(f, trial, rule)
            t_err = float(np.sqrt(t_cell.sum()))
            if t_err <= err:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        change = (err - t_err) / err
        knots, coef, cell_err, err = trial, t_coef, t_cell, t_err
        history.append(err)
        if change < tol:
            converged = True
            break
    if not converged:
        log.warning("best_fit_mesh: no convergence after %d iterations (error %.3e)",
                    max_iter, err)
    # equidistribution stalls near endpoint singularities; finish by descent
    polished = _polish(f, knots, rule, 20 * max_iter, min_gap)
    p_coef, p_cell = _ls_fit(f, polished, rule)
    p_err = float(np.sqrt(p_cell.sum()))
    if p_err < err:
        knots, coef, err = polished, p_coef, p_err
        history.append(err)
    return BestFit(Mesh1D(knots), coef, err, history, converged)
