"""Experiment drivers: build states from a config, run, and tabulate.

Every driver returns plain rows (lists of dicts) so the CLI only formats.
"""
from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np

from .config import ExperimentConfig, MeshSpec, ProblemSpec
from .diagnostics import (convergence_order, l2_error, total_mass,
                          waiting_time_estimate)
from .errors import DomainError
from .io import read_snapshot
from .mesh1d import State1D, best_fit_mesh, interpolate, uniform_mesh
from .mesh2d import disk_mesh, horseshoe_mesh, read_mesh, square_mesh
from .model import (BarenblattParams, PmeModel, WaitingTimeParams1D, barenblatt,
                    barenblatt_mass, barenblatt_norm_sq, barenblatt_support_radius,
                    horseshoe_initial, two_peak_initial, waiting_time_initial_1d,
                    waiting_time_initial_2d)
from .runner import run
from .solver2d import interpolate_2d

log = logging.getLogger(__name__)


def second_order_gap(a: float, b: float, N: int) -> float:
    """Smallest best-fit cell that keeps the fit second order at a square-root-type edge.

    Near an edge where the target behaves like ``s^(1/4)`` (m = 5) the first
    cell of width ``h`` contributes about ``h^(3/2)`` to the squared error,
    so ``h ~ N^(-8/3)`` keeps that contribution at the ``N^(-4)`` level of the
    rest while still bounding the stiffness of the edge cell.
    """
    return (b - a) * N ** (-8.0 / 3.0)


def initial_function(problem: ProblemSpec):
    """``(f, support)`` for the analytic initial data of ``problem``."""
    if problem.initial == "barenblatt":
        p = BarenblattParams(problem.m, problem.dim, problem.C)
        R = barenblatt_support_radius(problem.t0, p)
        if problem.dim == 1:
            return (lambda x: barenblatt(x, problem.t0, p)), (-R, R)
        return (lambda x, y: barenblatt(np.stack([x, y], axis=-1), problem.t0, p)), R
    if problem.initial == "waiting1d":
        wp = WaitingTimeParams1D(problem.theta, problem.m)
        return (lambda x: waiting_time_initial_1d(x, wp)), (-math.pi, 0.0)
    if problem.initial == "waiting2d":
        return waiting_time_initial_2d, math.pi
    if problem.initial == "horseshoe":
        return horseshoe_initial, None
    if problem.initial == "two-peak":
        return two_peak_initial, None
    raise DomainError(f"no analytic initial data for {problem.initial!r}")


def build_mesh_1d(mesh: MeshSpec, f, support):
    a, b = (mesh.a, mesh.b) if mesh.a is not None else support
    if mesh.kind == "uniform":
        return interpolate(f, uniform_mesh(a, b, mesh.N))
    gap = mesh.min_gap
    if gap == "second-order":
        gap = second_order_gap(a, b, mesh.N)
    fit = best_fit_mesh(f, (a, b), mesh.N, min_gap=gap)
    if not fit.converged:
        log.warning("best-fit mesh did not converge; using the best iterate")
    return State1D(fit.mesh, fit.coef)


def build_mesh_2d(mesh: MeshSpec, support_radius):
    if mesh.kind == "disk":
        radius = mesh.radius if support_radius is None else support_radius
        return disk_mesh(radius, mesh.rings)
    if mesh.kind == "square":
        return square_mesh(mesh.bounds, mesh.n)
    if mesh.kind == "horseshoe":
        return horseshoe_mesh(mesh.h)
    return read_mesh(mesh.path)


def initial_state(cfg: ExperimentConfig):
    pr = cfg.problem
    if pr.initial == "snapshot":
        return read_snapshot(pr.path)
    f, support = initial_function(pr)
    if pr.dim == 1:
        return build_mesh_1d(cfg.mesh, f, support)
    # Barenblatt disks are fitted to the support; other disks use the configured radius
    radius = support if pr.initial == "barenblatt" else None
    return interpolate_2d(f, build_mesh_2d(cfg.mesh, radius))


def model_of(cfg: ExperimentConfig) -> PmeModel:
    return PmeModel(cfg.problem.m, cfg.problem.dim)


def run_config(cfg: ExperimentConfig, observers=(), keep_reports=False):
    state0 = initial_state(cfg)
    rec = run(state0, model_of(cfg), cfg.scheme, observers=observers,
              keep_reports=keep_reports)
    return state0, rec


def exact_error(cfg: ExperimentConfig, state, t: float) -> float:
    """L2 distance to the Barenblatt profile at time ``t``."""
    pr = cfg.problem
    p = BarenblattParams(pr.m, pr.dim, pr.C)
    R = barenblatt_support_radius(t, p)
    if pr.dim == 1:
        A = min(state.x[0], -R) - 1.0
        B = max(state.x[-1], R) + 1.0
        return l2_error(state, lambda x: barenblatt(x, t, p), enclosure=(A, B),
                        breakpoints=(-R, R))
    return l2_error(state, lambda x, y: barenblatt(np.stack([x, y], axis=-1), t, p),
                    exact_norm_sq=barenblatt_norm_sq(t, p))


def _level_cfg(cfg: ExperimentConfig, level: int, j: int) -> ExperimentConfig:
    tau = cfg.scheme.tau * cfg.tau_factor**j
    scheme = dataclasses.replace(cfg.scheme, tau=tau)
    if cfg.problem.dim == 1:
        gap = cfg.mesh.min_gap
        if cfg.mesh.kind == "bestfit" and isinstance(gap, float) and j > 0:
            # a configured gap is the gap at the first level; keep its N^(-8/3) law
            gap = gap * (cfg.levels[0] / level) ** (8.0 / 3.0)
        mesh = dataclasses.replace(cfg.mesh, N=level, min_gap=gap)
    else:
        mesh = dataclasses.replace(cfg.mesh, rings=level)
    return dataclasses.replace(cfg, scheme=scheme, mesh=mesh)


def converge(cfg: ExperimentConfig, levels=None) -> list:
    """Barenblatt convergence table: one row per level with tau scaled per refinement.

    1D levels are cell counts; 2D levels are disk ring counts, and the order
    uses the vertex count.
    """
    if cfg.problem.initial != "barenblatt":
        raise DomainError("convergence tables need barenblatt initial data")
    levels = list(levels or cfg.levels)
    if len(levels) < 2:
        raise DomainError("need at least two levels")
    cfg = dataclasses.replace(cfg, levels=levels)
    rows = []
    for j, level in enumerate(levels):
        lc = _level_cfg(cfg, level, j)
        state0, rec = run_config(lc)
        if rec.stop_reason != "completed":
            raise DomainError(f"level {level} stopped early: {rec.stop_reason}")
        st = rec.final_state
        size = st.N if cfg.problem.dim == 1 else st.mesh.n_vertices
        rows.append({"level": level, "N": size, "tau": lc.scheme.tau,
                     "err_L2": exact_error(lc, st, lc.scheme.T), "flags": ";".join(rec.flags)})
    orders = convergence_order([r["err_L2"] for r in rows], [r["N"] for r in rows],
                               cfg.problem.dim)
    rows[0]["order"] = None
    for r, p in zip(rows[1:], orders):
        r["order"] = p
    return rows


def mass_table(cfg: ExperimentConfig, levels=None) -> list:
    """Mass drift ``|mass(T) - mass(t0)|`` per level, with the observed orders.

    ``mass_t0`` is the mass of the interpolated initial data and
    ``err_vs_exact`` the distance of the final mass from the exact mass.
    """
    if cfg.problem.dim != 1:
        raise DomainError("the mass table is a 1D experiment")
    levels = list(levels or cfg.levels)
    cfg = dataclasses.replace(cfg, levels=levels)
    exact = None
    if cfg.problem.initial == "barenblatt":
        exact = barenblatt_mass(cfg.problem.t0, BarenblattParams(cfg.problem.m, 1, cfg.problem.C))
    rows = []
    for j, level in enumerate(levels):
        lc = _level_cfg(cfg, level, j)
        state0, rec = run_config(lc)
        m0 = total_mass(state0)
        m1 = total_mass(rec.final_state)
        rows.append({"N": level, "tau": lc.scheme.tau, "mass_t0": m0, "mass_T": m1,
                     "mass_error": abs(m1 - m0),
                     "err_vs_exact": None if exact is None else abs(m1 - exact)})
    orders = convergence_order([r["mass_error"] for r in rows], levels, 1)
    rows[0]["order"] = None
    for r, p in zip(rows[1:], orders):
        r["order"] = p
    return rows


def waiting_time(cfg: ExperimentConfig):
    """Run and estimate the waiting time; returns ``(estimate, record)``."""
    _, rec = run_config(cfg)
    return waiting_time_estimate(rec, cfg.output.waiting_delta), rec
