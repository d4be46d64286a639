"""Explicit moving-mesh scheme on triangulations.

Vertex ``i`` moving in x changes ``rho_h`` at a fixed point by
``psi_{x,i} = -(d rho_h/dx) phi_i`` (cellwise), and likewise in y.  One step
solves, with ``M`` over interior vertices and ``D`` over all vertices::

    M lam = dE/drho
    D v_x = -dE/dx + (B_x - E_x)^T lam
    D v_y = -dE/dy + (B_y - E_y)^T lam
    M rho_dot = -(B_x - E_x) v_x - (B_y - E_y) v_y

then moves every vertex with its velocity.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import AssumptionError, DomainError
from .linalg import solve_cg
from .mesh2d import TriMesh, mesh_quality
from .model import PmeModel
from .stepping import SchemeConfig, StepReport


@dataclass(frozen=True)
class TriangleRule:
    degree: int
    bary: np.ndarray     # (Q, 3)
    weights: np.ndarray  # (Q,), sums to 1


@lru_cache(maxsize=None)
def triangle_rule(degree: int = 5) -> TriangleRule:
    """Symmetric rules: centroid (degree 1), 3-point (2), 7-point (5)."""
    if degree <= 1:
        bary = np.array([[1 / 3, 1 / 3, 1 / 3]])
        w = np.array([1.0])
        deg = 1
    elif degree == 2:
        bary = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1 / 3)
        deg = 2
    else:
        a, b = 0.470142064105115, 0.101286507323456
        wa, wb = 0.132394152788506, 0.125939180544827
        bary = np.array([
            [1 / 3, 1 / 3, 1 / 3],
            [a, a, 1 - 2 * a], [a, 1 - 2 * a, a], [1 - 2 * a, a, a],
            [b, b, 1 - 2 * b], [b, 1 - 2 * b, b], [1 - 2 * b, b, b],
        ])
        w = np.array([0.225, wa, wa, wa, wb, wb, wb])
        deg = 5
    return TriangleRule(deg, bary, w)


@dataclass
class State2D:
    mesh: TriMesh
    rho: np.ndarray   # values at mesh.interior, in that order

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != (self.mesh.interior.size,):
            raise DomainError(
                f"expected {self.mesh.interior.size} interior values, got {self.rho.shape}"
            )

    def nodal(self) -> np.ndarray:
        out = np.zeros(self.mesh.n_vertices)
        out[self.mesh.interior] = self.rho
        return out

    def copy(self) -> "State2D":
        m = self.mesh
        return State2D(TriMesh(m.vertices.copy(), m.cells.copy(), m.boundary.copy()),
                       self.rho.copy())


def interpolate_2d(f, mesh: TriMesh) -> State2D:
    v = mesh.vertices[mesh.interior]
    return State2D(mesh, np.asarray(f(v[:, 0], v[:, 1]), dtype=float))


@dataclass
class Geometry:
    area: np.ndarray   # (nc,)
    grad: np.ndarray   # (nc, 3, 2) gradients of the barycentric basis


def geometry(mesh: TriMesh, vertices=None) -> Geometry:
    P = (mesh.vertices if vertices is None else vertices)[mesh.cells]
    area = mesh.signed_areas(vertices)
    if np.any(area <= 0):
        bad = int(np.argmin(area))
        raise AssumptionError(f"degenerate or inverted triangle {bad} (area {area[bad]:.3e})")
    grad = np.empty((P.shape[0], 3, 2))
    for a in range(3):
        p1 = P[:, (a + 1) % 3]
        p2 = P[:, (a + 2) % 3]
        grad[:, a, 0] = (p1[:, 1] - p2[:, 1]) / (2 * area)
        grad[:, a, 1] = (p2[:, 0] - p1[:, 0]) / (2 * area)
    return Geometry(area, grad)


def _cell_values(state: State2D, rule: TriangleRule):
    nod = state.nodal()
    rc = nod[state.mesh.cells]              # (nc, 3)
    rq = rc @ rule.bary.T                    # (nc, Q)
    return rc, rq


def _sparse(mesh: TriMesh, local, n):
    rows = np.repeat(mesh.cells, 3, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 3)).ravel()
    return sp.csr_matrix((local.reshape(-1), (rows, cols)), shape=(n, n))


def _scatter(mesh: TriMesh, local, n):
    return np.bincount(mesh.cells.ravel(), weights=local.ravel(), minlength=n)


@dataclass
class System2D:
    M: sp.csr_matrix
    D: sp.csr_matrix
    Bx: sp.csr_matrix
    By: sp.csr_matrix
    Ex: sp.csr_matrix
    Ey: sp.csr_matrix
    grad_rho: np.ndarray
    grad_x: np.ndarray
    grad_y: np.ndarray

    @property
    def Gx(self):
        return (self.Bx - self.Ex).tocsr()

    @property
    def Gy(self):
        return (self.By - self.Ey).tocsr()


def assemble_2d(state: State2D, model: PmeModel, rule: TriangleRule | None = None) -> System2D:
    rule = rule or triangle_rule()
    mesh = state.mesh
    n = mesh.n_vertices
    inner = mesh.interior
    geo = geometry(mesh)
    L, w = rule.bary, rule.weights
    rc, rq = _cell_values(state, rule)
    A = geo.area
    LL = L[:, :, None] * L[:, None, :]                        # (Q, 3, 3)
    mass = A[:, None, None] * np.einsum("qab,q->ab", LL, w)[None]
    dmass = A[:, None, None] * np.einsum("qab,nq,q->nab", LL, rq, w)
    rho_phi = A[:, None] * np.einsum("qa,nq,q->na", L, rq, w)
    g = np.einsum("na,nad->nd", rc, geo.grad)                 # grad rho_h per cell
    fmom = A[:, None] * np.einsum("qa,nq,q->na", L, model.fprime(rq), w)

    Mfull = _sparse(mesh, mass, n)
    D = _sparse(mesh, dmass, n)
    Bx = _sparse(mesh, -g[:, 0, None, None] * mass, n)
    By = _sparse(mesh, -g[:, 1, None, None] * mass, n)
    Ex = _sparse(mesh, geo.grad[:, :, 0, None] * rho_phi[:, None, :], n)
    Ey = _sparse(mesh, geo.grad[:, :, 1, None] * rho_phi[:, None, :], n)
    return System2D(
        M=Mfull[inner][:, inner],
        D=D,
        Bx=Bx[inner],
        By=By[inner],
        Ex=Ex[inner],
        Ey=Ey[inner],
        grad_rho=_scatter(mesh, fmom, n)[inner],
        grad_x=_scatter(mesh, -g[:, 0, None] * fmom, n),
        grad_y=_scatter(mesh, -g[:, 1, None] * fmom, n),
    )


def locate(mesh: TriMesh, point) -> tuple[int, np.ndarray]:
    """Cell containing ``point`` and its barycentric coordinates there."""
    P = mesh.vertices[mesh.cells]
    geo = geometry(mesh)
    rel = np.asarray(point, dtype=float)[None, :] - P[:, 0]
    lam12 = np.stack([np.einsum("nd,nd->n", rel, geo.grad[:, 1]),
                      np.einsum("nd,nd->n", rel, geo.grad[:, 2])], axis=1)
    bary = np.column_stack([1 - lam12.sum(axis=1), lam12])
    inside = np.all(bary >= -1e-12, axis=1)
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        raise DomainError(f"point {tuple(point)} lies outside the mesh")
    c = int(hits[0])
    return c, bary[c]


def eval_rho_2d(state: State2D, point) -> float:
    c, bary = locate(state.mesh, point)
    return float(state.nodal()[state.mesh.cells[c]] @ bary)


def eval_psi_xy(state: State2D, i: int, point) -> tuple[float, float]:
    mesh = state.mesh
    if not 0 <= i < mesh.n_vertices:
        raise DomainError(f"vertex index {i} out of range")
    c, bary = locate(mesh, point)
    local = np.flatnonzero(mesh.cells[c] == i)
    if local.size == 0:
        return 0.0, 0.0
    geo = geometry(TriMesh(mesh.vertices, mesh.cells[c:c + 1], mesh.boundary))
    g = state.nodal()[mesh.cells[c]] @ geo.grad[0]
    phi = bary[local[0]]
    return float(-g[0] * phi), float(-g[1] * phi)


def energy_2d(state: State2D, model: PmeModel, rule: TriangleRule | None = None) -> float:
    rule = rule or triangle_rule()
    geo = geometry(state.mesh)
    _, rq = _cell_values(state, rule)
    return float(geo.area @ (model.f(rq) @ rule.weights))


def dissipation_2d(state: State2D, v, rule: TriangleRule | None = None) -> float:
    """Half the density-weighted L2 norm squared of the P1 velocity field."""
    rule = rule or triangle_rule()
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    geo = geometry(state.mesh)
    _, rq = _cell_values(state, rule)
    vq = np.einsum("qa,nad->nqd", rule.bary, v[state.mesh.cells])
    return float(0.5 * geo.area @ ((rq * np.sum(vq**2, axis=2)) @ rule.weights))


def total_mass_2d(state: State2D) -> float:
    rc = state.nodal()[state.mesh.cells]
    return float(state.mesh.signed_areas() @ rc.mean(axis=1))


def mass_vector_2d(state: State2D, rule: TriangleRule | None = None) -> np.ndarray:
    rule = rule or triangle_rule()
    mesh = state.mesh
    geo = geometry(mesh)
    LL = rule.bary[:, :, None] * rule.bary[:, None, :]
    mass = geo.area[:, None, None] * np.einsum("qab,q->ab", LL, rule.weights)[None]
    Mfull = _sparse(mesh, mass, mesh.n_vertices)
    return (Mfull @ state.nodal())[mesh.interior]


def _solve_spd(A, b, flags, name, tol):
    if not np.all(A.diagonal() > 0):
        flags.append(f"{name}_singular")
    return solve_cg(A, b, tol=tol).x


def explicit_step_2d(state: State2D, model: PmeModel, cfg: SchemeConfig,
                     cg_tol: float = 1e-12):
    rule = triangle_rule(cfg.quad_order)
    sys_ = assemble_2d(state, model, rule)
    flags = []
    Gx, Gy = sys_.Gx, sys_.Gy
    lam = _solve_spd(sys_.M, sys_.grad_rho, flags, "M", cg_tol)
    vx = _solve_spd(sys_.D, -sys_.grad_x + Gx.T @ lam, flags, "D", cg_tol)
    vy = _solve_spd(sys_.D, -sys_.grad_y + Gy.T @ lam, flags, "D", cg_tol)
    rho_dot = _solve_spd(sys_.M, -(Gx @ vx) - (Gy @ vy), flags, "M", cg_tol)
    v = np.column_stack([vx, vy])
    mesh = state.mesh
    new = State2D(mesh.moved(mesh.vertices + cfg.tau * v), state.rho + cfg.tau * rho_dot)
    quality = mesh_quality(new.mesh)
    flags = sorted(set(flags))
    if quality.tangled:
        flags.append("tangled")
        e1 = float("nan")
    else:
        e1 = energy_2d(new, model, rule)
    if np.any(new.rho < 0):
        flags.append("A2")
    rate = float(sys_.grad_rho @ rho_dot + sys_.grad_x @ vx + sys_.grad_y @ vy)
    return new, StepReport(
        lam=lam, v=v, rho_dot=rho_dot, fp_iters=1,
        energy_before=energy_2d(state, model, rule), energy_after=e1,
        dissipation=dissipation_2d(state, v, rule), energy_rate=rate,
        mass_before=total_mass_2d(state), mass_after=total_mass_2d(new),
        assumptions=quality, flags=flags,
    )
