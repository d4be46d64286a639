"""Matrices and energy gradients of the 1D moving-mesh system.

Everything is assembled cell by cell on the full knot index set 0..N and
then sliced: rows over interior knots give M, B, E; full rows give the
mass-conserving variants.  All entries, including those with closed forms,
go through the same Gauss rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError
from .linalg import TriDiagMatrix
from .mesh1d import Mesh1D, State1D, gauss_legendre
from .model import PmeModel


def _require_a1(x):
    h = np.diff(x)
    if np.any(h <= 0):
        i = int(np.argmin(h))
        raise AssumptionError(f"knots not strictly increasing at cell {i + 1} (h={h[i]:.3e})")
    return h


@dataclass
class CellData:
    """Per-cell local quantities; index 0 is the left knot, 1 the right."""

    h: np.ndarray        # (N,)
    slope: np.ndarray    # (N,) d rho_h / dx on each cell
    mass: np.ndarray     # (N, 2, 2) int phi_a phi_b
    dmass: np.ndarray    # (N, 2, 2) int rho_h phi_a phi_b
    rho_phi: np.ndarray  # (N, 2) int rho_h phi_a


def _local(state: State1D, rule) -> CellData:
    x = state.x
    h = _require_a1(x)
    nod = state.nodal()
    s, w = rule.nodes, rule.weights
    phi = np.stack([1 - s, s])                           # (2, Q)
    rq = nod[:-1, None] * phi[0] + nod[1:, None] * phi[1]  # (N, Q)
    pp = phi[:, None, :] * phi[None, :, :]               # (2, 2, Q)
    mass = h[:, None, None] * (pp @ w)[None]
    dmass = h[:, None, None] * np.einsum("abq,nq,q->nab", pp, rq, w)
    rho_phi = h[:, None] * np.einsum("aq,nq,q->na", phi, rq, w)
    slope = (nod[1:] - nod[:-1]) / h
    return CellData(h, slope, mass, dmass, rho_phi)


def _scatter_tri(local):
    """Sum (N, 2, 2) cell blocks into the diagonals of an (N+1)^2 matrix."""
    n = local.shape[0]
    main = np.zeros(n + 1)
    main[:-1] += local[:, 0, 0]
    main[1:] += local[:, 1, 1]
    sup = local[:, 0, 1].copy()   # A[c, c+1]
    sub = local[:, 1, 0].copy()   # A[c+1, c]
    return TriDiagMatrix(sub, main, sup)


def _scatter_vec(local):
    n = local.shape[0]
    out = np.zeros(n + 1)
    out[:-1] += local[:, 0]
    out[1:] += local[:, 1]
    return out


def _full_mass(mesh: Mesh1D, rule) -> TriDiagMatrix:
    h = _require_a1(mesh.knots)
    s, w = rule.nodes, rule.weights
    phi = np.stack([1 - s, s])
    local = h[:, None, None] * ((phi[:, None, :] * phi[None, :, :]) @ w)[None]
    return _scatter_tri(local)


def _interior(T: TriDiagMatrix) -> TriDiagMatrix:
    return TriDiagMatrix(T.sub[1:-1].copy(), T.main[1:-1].copy(), T.sup[1:-1].copy())


def _dense(T: TriDiagMatrix) -> np.ndarray:
    return T.todense()


def assemble_M(mesh: Mesh1D, rule=None) -> TriDiagMatrix:
    """Interior mass matrix ``int phi_i phi_j``, size (N-1)^2."""
    return _interior(_full_mass(mesh, rule or gauss_legendre()))


def assemble_Mhat(mesh: Mesh1D, rule=None) -> np.ndarray:
    """Mass matrix with interior rows and all columns, (N-1) x (N+1)."""
    return _dense(_full_mass(mesh, rule or gauss_legendre()))[1:-1, :]


def assemble_D(state: State1D, rule=None) -> TriDiagMatrix:
    """Density-weighted mass matrix ``int rho_h phi_i phi_j`` over all knots."""
    cd = _local(state, rule or gauss_legendre())
    return _scatter_tri(cd.dmass)


def _full_B(cd: CellData) -> np.ndarray:
    # int phi_a psi_b = -slope * int phi_a phi_b on each cell
    return _dense(_scatter_tri(-cd.slope[:, None, None] * cd.mass))


def _full_E(cd: CellData) -> np.ndarray:
    # int rho_h (d phi_a/dx) phi_b; d phi/dx = -1/h (left), +1/h (right)
    dphi = np.stack([-1.0 / cd.h, 1.0 / cd.h], axis=1)          # (N, 2)
    local = dphi[:, :, None] * cd.rho_phi[:, None, :]
    return _dense(_scatter_tri(local))


def assemble_Bhat(state: State1D, rule=None) -> np.ndarray:
    return _full_B(_local(state, rule or gauss_legendre()))


def assemble_Ehat(state: State1D, rule=None) -> np.ndarray:
    return _full_E(_local(state, rule or gauss_legendre()))


def assemble_B(state: State1D, rule=None) -> np.ndarray:
    """``int phi_i psi_j``, interior rows, (N-1) x (N+1)."""
    return assemble_Bhat(state, rule)[1:-1, :]


def assemble_E(state: State1D, rule=None) -> np.ndarray:
    """``int rho_h phi_i' phi_j``, interior rows, (N-1) x (N+1)."""
    return assemble_Ehat(state, rule)[1:-1, :]


def _pressure_moments(state: State1D, model: PmeModel, rule):
    x = state.x
    h = _require_a1(x)
    nod = state.nodal()
    s, w = rule.nodes, rule.weights
    phi = np.stack([1 - s, s])
    rq = nod[:-1, None] * phi[0] + nod[1:, None] * phi[1]
    fp = model.fprime(rq)
    mom = h[:, None] * np.einsum("nq,aq,q->na", fp, phi, w)   # int f'(rho_h) phi_a
    slope = (nod[1:] - nod[:-1]) / h
    return mom, slope


def grad_energy_rho(state: State1D, model: PmeModel, rule=None) -> np.ndarray:
    mom, _ = _pressure_moments(state, model, rule or gauss_legendre())
    return _scatter_vec(mom)[1:-1]


def grad_energy_x(state: State1D, model: PmeModel, rule=None) -> np.ndarray:
    mom, slope = _pressure_moments(state, model, rule or gauss_legendre())
    return _scatter_vec(-slope[:, None] * mom)


@dataclass
class System1D:
    """Everything one step of a 1D scheme needs, assembled at one state."""

    M: TriDiagMatrix
    Mfull: TriDiagMatrix
    D: TriDiagMatrix
    Bfull: np.ndarray
    Efull: np.ndarray
    grad_rho: np.ndarray
    grad_x: np.ndarray

    @property
    def G(self) -> np.ndarray:
        """Interior rows of B - E."""
        return (self.Bfull - self.Efull)[1:-1, :]

    @property
    def Ghat(self) -> np.ndarray:
        return self.Bfull - self.Efull

    @property
    def Mhat(self) -> np.ndarray:
        return self.Mfull.todense()[1:-1, :]


def assemble_system(state: State1D, model: PmeModel, rule=None) -> System1D:
    rule = rule or gauss_legendre()
    cd = _local(state, rule)
    Mfull = _scatter_tri(cd.mass)
    mom, slope = _pressure_moments(state, model, rule)
    return System1D(
        M=_interior(Mfull),
        Mfull=Mfull,
        D=_scatter_tri(cd.dmass),
        Bfull=_full_B(cd),
        Efull=_full_E(cd),
        grad_rho=_scatter_vec(mom)[1:-1],
        grad_x=_scatter_vec(-slope[:, None] * mom),
    )
