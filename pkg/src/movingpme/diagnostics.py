"""Observables of a run: energy, dissipation, mass, errors and rates.

Functions taking a state accept both 1D and 2D states and dispatch on type.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .mesh1d import State1D, gauss_legendre
from .model import PmeModel


def _is_2d(state) -> bool:
    return not isinstance(state, State1D)


def _cell_values_1d(state: State1D, rule):
    nod = state.nodal()
    s = rule.nodes
    return nod[:-1, None] * (1 - s) + nod[1:, None] * s


def discrete_energy(state, model: PmeModel, rule=None) -> float:
    """Quadrature value of the integral of ``f(rho_h)``."""
    if _is_2d(state):
        from .solver2d import energy_2d, triangle_rule

        return energy_2d(state, model, rule if rule is not None and hasattr(rule, "bary")
                         else triangle_rule())
    rule = rule or gauss_legendre()
    h = np.diff(state.x)
    return float(h @ (model.f(_cell_values_1d(state, rule)) @ rule.weights))


def dissipation(state, v, rule=None) -> float:
    """``Phi_h = 1/2 int rho_h |v_h|^2`` with ``v_h`` the P1 velocity field."""
    if _is_2d(state):
        from .solver2d import dissipation_2d, triangle_rule

        return dissipation_2d(state, v, rule if rule is not None and hasattr(rule, "bary")
                              else triangle_rule())
    rule = rule or gauss_legendre()
    v = np.asarray(v, dtype=float)
    if v.shape != (state.N + 1,):
        raise DomainError(f"velocity needs {state.N + 1} entries, got {v.shape}")
    s = rule.nodes
    vq = v[:-1, None] * (1 - s) + v[1:, None] * s
    rq = _cell_values_1d(state, rule)
    h = np.diff(state.x)
    return float(0.5 * h @ ((rq * vq**2) @ rule.weights))


def total_mass(state, rule=None) -> float:
    """Exact integral of the piecewise-linear density (trapezoid rule)."""
    if _is_2d(state):
        from .solver2d import total_mass_2d

        return total_mass_2d(state)
    nod = state.nodal()
    return float(np.diff(state.x) @ (0.5 * (nod[:-1] + nod[1:])))


def mass_vector(state, rule=None) -> np.ndarray:
    """``M rho``: the integrals of ``rho_h`` against each interior basis function."""
    if _is_2d(state):
        from .solver2d import mass_vector_2d

        return mass_vector_2d(state)
    from .assembly1d import assemble_M

    return assemble_M(state.mesh, rule).matvec(state.rho)


# ---------------------------------------------------------------- L2 errors

def _crosses(vals) -> bool:
    pos = vals > 0
    return bool(pos.any() and not pos.all())


def _l2_interval(g, a, b, rule, depth):
    """Integral of ``g`` over [a, b], bisecting where ``g``'s support starts or ends."""
    xq = a + (b - a) * rule.nodes
    probe = g.support(np.concatenate([[a], xq, [b]]))
    if depth > 0 and _crosses(probe):
        mid = 0.5 * (a + b)
        return _l2_interval(g, a, mid, rule, depth - 1) + _l2_interval(g, mid, b, rule, depth - 1)
    return (b - a) * float(rule.weights @ g(xq))


class _SquaredGap:
    def __init__(self, state, exact):
        self.knots = state.x
        self.nod = state.nodal()
        self.exact = exact

    def rho_h(self, x):
        inside = (x >= self.knots[0]) & (x <= self.knots[-1])
        return np.where(inside, np.interp(x, self.knots, self.nod), 0.0)

    def support(self, x):
        # indicator of where either function is nonzero (or the mesh is)
        inside = (x > self.knots[0]) & (x < self.knots[-1])
        return np.where(inside | (np.asarray(self.exact(x)) != 0), 1.0, 0.0)

    def __call__(self, x):
        return (np.asarray(self.exact(x), dtype=float) - self.rho_h(x)) ** 2


def l2_error(state, exact, rule=None, enclosure=None, breakpoints=(), depth: int = 6,
             exact_norm_sq: float | None = None) -> float:
    """L2 distance between ``rho_h`` and ``exact``, each taken as zero off its support.

    1D: the integral runs over ``enclosure = (A, B)``, split at the mesh knots
    and any extra ``breakpoints`` (e.g. the exact support ends); cells where
    either support begins or ends are bisected ``depth`` times.

    2D: see :func:`l2_error_2d`.
    """
    if _is_2d(state):
        return l2_error_2d(state, exact, rule, exact_norm_sq=exact_norm_sq, depth=depth)
    rule = rule or gauss_legendre(5)
    x = state.x
    if enclosure is None:
        raise DomainError("1D l2_error needs an enclosure (A, B)")
    A, B = map(float, enclosure)
    if A > x[0] or B < x[-1]:
        raise DomainError(f"enclosure [{A}, {B}] does not contain the mesh [{x[0]}, {x[-1]}]")
    ends = np.asarray(exact(np.array([A, B])), dtype=float)
    if np.any(ends != 0):
        raise DomainError(f"exact solution is nonzero at the enclosure ends [{A}, {B}]")
    pts = np.unique(np.concatenate([[A, B], x, np.asarray(breakpoints, dtype=float)]))
    pts = pts[(pts >= A) & (pts <= B)]
    g = _SquaredGap(state, exact)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            total += _l2_interval(g, a, b, rule, depth)
    return math.sqrt(max(total, 0.0))


_CHILDREN = np.array([
    [[1, 0, 0], [.5, .5, 0], [.5, 0, .5]],
    [[.5, .5, 0], [0, 1, 0], [0, .5, .5]],
    [[.5, 0, .5], [0, .5, .5], [0, 0, 1]],
    [[.5, .5, 0], [0, .5, .5], [.5, 0, .5]],
])


def l2_error_2d(state, exact, rule=None, exact_norm_sq: float | None = None,
                depth: int = 6) -> float:
    """L2 distance on the plane for a triangulated density.

    The mesh part is integrated cell by cell; cells where the exact support
    begins or ends are split into four recursively, up to ``depth`` times.
    Outside the mesh only ``exact`` contributes; when ``exact_norm_sq`` (its
    squared norm over the plane) is given that part is
    ``exact_norm_sq - int_{mesh} exact^2``, otherwise ``exact`` must vanish
    on every boundary vertex and is assumed zero outside.

    ``exact(x, y)`` is called with arrays.
    """
    from .solver2d import triangle_rule

    rule = rule if rule is not None and hasattr(rule, "bary") else triangle_rule(5)
    mesh = state.mesh
    P = mesh.vertices[mesh.cells]                 # (nc, 3, 2)
    nod = state.nodal()[mesh.cells]               # (nc, 3)
    if exact_norm_sq is None:
        bv = mesh.vertices[mesh.boundary]
        if np.any(np.asarray(exact(bv[:, 0], bv[:, 1])) != 0):
            raise DomainError("exact solution is nonzero on the mesh boundary; "
                              "pass its squared norm over the plane")
    gap = 0.0
    inside_sq = 0.0
    # sub-triangles as barycentric corners relative to their parent cell
    sub = np.broadcast_to(np.eye(3), (P.shape[0], 3, 3)).copy()
    owner = np.arange(P.shape[0])
    for level in range(depth + 1):
        corners = np.einsum("nab,nbd->nad", sub, P[owner])
        area = 0.5 * np.abs(
            (corners[:, 1, 0] - corners[:, 0, 0]) * (corners[:, 2, 1] - corners[:, 0, 1])
            - (corners[:, 1, 1] - corners[:, 0, 1]) * (corners[:, 2, 0] - corners[:, 0, 0])
        )
        ev = np.asarray(exact(corners[..., 0], corners[..., 1]), dtype=float)
        if level < depth:
            split = np.array([_crosses(row) for row in ev])
        else:
            split = np.zeros(len(owner), dtype=bool)
        done = ~split
        if done.any():
            bq = np.einsum("qa,nab->nqb", rule.bary, sub[done])        # parent barycentrics
            xy = np.einsum("nqb,nbd->nqd", bq, P[owner[done]])
            ex = np.asarray(exact(xy[..., 0], xy[..., 1]), dtype=float)
            rh = np.einsum("nqb,nb->nq", bq, nod[owner[done]])
            gap += float(area[done] @ (((ex - rh) ** 2) @ rule.weights))
            inside_sq += float(area[done] @ ((ex**2) @ rule.weights))
        if not split.any():
            break
        kids = np.einsum("kab,nbc->nkac", _CHILDREN, sub[split])
        sub = kids.reshape(-1, 3, 3)
        owner = np.repeat(owner[split], 4)
    outside = 0.0 if exact_norm_sq is None else max(exact_norm_sq - inside_sq, 0.0)
    return math.sqrt(max(gap + outside, 0.0))


# ----------------------------------------------------------- rates and times

def convergence_order(errors, Ns, dim: int = 1) -> list:
    """Pairwise observed orders; in 2D ``N`` counts vertices so ``h ~ N^(-1/2)``."""
    errors = [float(e) for e in errors]
    Ns = [float(n) for n in Ns]
    if len(errors) != len(Ns) or len(errors) < 2:
        raise DomainError("need equal-length lists with at least two entries")
    if any(not e > 0 for e in errors):
        raise DomainError(f"errors must be positive, got {errors}")
    if any(not n > 0 for n in Ns):
        raise DomainError(f"sizes must be positive, got {Ns}")
    if dim not in (1, 2):
        raise DomainError(f"dim must be 1 or 2, got {dim}")
    out = []
    for (e1, n1), (e2, n2) in zip(zip(errors, Ns), zip(errors[1:], Ns[1:])):
        ratio = n2 / n1 if dim == 1 else math.sqrt(n2 / n1)
        out.append(math.log(e1 / e2) / math.log(ratio))
    return out


def support_diameter(boundary) -> float:
    b = np.asarray(boundary, dtype=float)
    if b.ndim == 1:
        return float(b.max() - b.min())
    from scipy.spatial.distance import pdist

    return float(pdist(b).max()) if len(b) > 1 else 0.0


def support_measure(state) -> float:
    """Length (1D) or area (2D) of the numerical support."""
    if _is_2d(state):
        return float(state.mesh.signed_areas().sum())
    return float(state.x[-1] - state.x[0])


WAITING_THRESHOLDS = {"support": 2.5e-3, "displacement": 0.01}


def waiting_time_estimate(record, delta_frac: float | None = None, method: str = "support"):
    """First recorded time at which the free boundary has visibly started to move.

    ``method="support"`` (default) compares the support measure (length in
    1D, area in 2D) with its initial value and fires when the relative growth
    exceeds ``delta_frac`` (default 2.5e-3).  It ignores tangential sliding
    of boundary vertices, which in 2D starts immediately.

    ``method="displacement"`` fires when some boundary point has moved by
    more than ``delta_frac`` (default 0.01) times the initial support diameter.

    ``record`` needs ``times`` plus ``support`` or ``boundary`` sequences.
    Returns None when the threshold is never reached.
    """
    if method not in WAITING_THRESHOLDS:
        raise DomainError(f"unknown method {method!r}")
    if delta_frac is None:
        delta_frac = WAITING_THRESHOLDS[method]
    times = list(record.times)
    if not times:
        return None
    if method == "support":
        meas = np.asarray(record.support, dtype=float)
        growth = meas / meas[0] - 1.0
        hit = np.flatnonzero(growth > delta_frac)
        return float(times[hit[0]]) if hit.size else None
    traj = list(record.boundary)
    b0 = np.asarray(traj[0], dtype=float)
    thresh = delta_frac * support_diameter(b0)
    for t, b in zip(times, traj):
        d = np.asarray(b, dtype=float) - b0
        disp = np.abs(d).max() if d.ndim == 1 else np.sqrt((d**2).sum(axis=1)).max()
        if disp > thresh:
            return float(t)
    return None


# --------------------------------------------------------------- run rows

@dataclass
class DiagRow:
    t: float
    energy: float
    dissipation: float
    total_mass: float
    mass_vector_norm: float
    boundary: dict
    fp_iters: int = 0
    rate_residual: float = 0.0
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {
            "t": self.t,
            "energy": self.energy,
            "dissipation": self.dissipation,
            "total_mass": self.total_mass,
            "mass_vector_norm": self.mass_vector_norm,
        }
        out.update(self.boundary)
        out.update(fp_iters=self.fp_iters, rate_residual=self.rate_residual,
                   flags=";".join(self.flags))
        return out


def boundary_of(state) -> np.ndarray:
    if _is_2d(state):
        return state.mesh.vertices[state.mesh.boundary].copy()
    return np.array([state.x[0], state.x[-1]])


def boundary_summary(state) -> dict:
    if not _is_2d(state):
        return {"a": float(state.x[0]), "b": float(state.x[-1])}
    b = boundary_of(state)
    c = state.mesh.vertices.mean(axis=0)
    r = np.hypot(b[:, 0] - c[0], b[:, 1] - c[1])
    digest = hashlib.sha1(np.ascontiguousarray(b).tobytes()).hexdigest()[:12]
    return {"boundary_hash": digest, "r_min": float(r.min()), "r_max": float(r.max()),
            "r_mean": float(r.mean())}


def diag_row(t, state, model, mass_vec0, report=None, rule=None) -> DiagRow:
    """Diagnostics of ``state`` at time ``t``; ``report`` is the step that produced it."""
    mv = mass_vector(state)
    return DiagRow(
        t=float(t),
        energy=discrete_energy(state, model, rule),
        dissipation=report.dissipation if report is not None else 0.0,
        total_mass=total_mass(state),
        mass_vector_norm=float(np.max(np.abs(mv - mass_vec0), initial=0.0)),
        boundary=boundary_summary(state),
        fp_iters=report.fp_iters if report is not None else 0,
        rate_residual=report.rate_residual if report is not None else 0.0,
        flags=list(report.flags) if report is not None else [],
    )
