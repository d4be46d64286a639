"""Fixed-step time loop shared by the 1D and 2D schemes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import boundary_of, diag_row, mass_vector, support_measure
from .mesh1d import State1D
from .stepping import SchemeConfig

log = logging.getLogger(__name__)


@dataclass
class RunRecord:
    rows: list = field(default_factory=list)
    times: list = field(default_factory=list)
    boundary: list = field(default_factory=list)   # per row: (a, b) or boundary vertex array
    support: list = field(default_factory=list)    # per row: support length or area
    final_state: object = None
    stop_reason: str = "completed"
    flags: list = field(default_factory=list)
    reports: list = field(default_factory=list)

    @property
    def t_final(self) -> float:
        return self.times[-1] if self.times else float("nan")


def _stepper(state, cfg):
    if isinstance(state, State1D):
        from .scheme1d import STEPPERS

        return STEPPERS[cfg.kind]
    from .solver2d import explicit_step_2d

    if cfg.kind != "explicit":
        raise ValueError(f"only the explicit scheme is available in 2D, got {cfg.kind!r}")
    return explicit_step_2d


def run(state0, model, cfg: SchemeConfig, observers=(), keep_reports: bool = False,
        stop_on_tangle: bool = True) -> RunRecord:
    """March ``state0`` from ``cfg.t0`` to ``cfg.T`` with ``cfg.n_steps`` fixed steps.

    ``observers`` are called as ``obs(step_index, t, state, row, report)``
    after the initial state (``report`` None) and after every step.  An
    assumption violation stops the run in strict mode; in 2D a tangled mesh
    always stops it.
    """
    step = _stepper(state0, cfg)
    rec = RunRecord()
    state = state0
    mv0 = mass_vector(state0)

    def record(k, t, st, rep):
        row = diag_row(t, st, model, mv0, rep)
        rec.rows.append(row)
        rec.times.append(float(t))
        rec.boundary.append(boundary_of(st))
        rec.support.append(support_measure(st))
        for obs in observers:
            obs(k, t, st, row, rep)

    record(0, cfg.t0, state, None)
    n = cfg.n_steps
    for k in range(1, n + 1):
        new, rep = step(state, model, cfg)
        t = cfg.t0 + k * cfg.tau
        if keep_reports:
            rec.reports.append(rep)
        for f in rep.flags:
            if f not in rec.flags:
                rec.flags.append(f)
        if ("tangled" in rep.flags and stop_on_tangle) or "A1" in rep.flags:
            # an invalid mesh cannot be assembled on; keep the last valid state
            rec.stop_reason = f"mesh invalid (tangled) at t={t:.6g}"
            log.warning("mesh invalid at t=%g; stopping with the last valid state", t)
            break
        state = new
        record(k, t, state, rep)
        if "A2" in rep.flags and cfg.strict:
            rec.stop_reason = f"assumption A2 violated at t={t:.6g}"
            break
        if not np.all(np.isfinite(state.rho)):
            rec.stop_reason = f"non-finite density at t={t:.6g}"
            break
    rec.final_state = state
    return rec
