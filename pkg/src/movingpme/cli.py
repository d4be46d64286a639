"""Command-line harness.

    movingpme run          --config exp.ini --out results/
    movingpme waiting-time --config exp.ini --out results/
    movingpme converge     --config exp.ini --out results/ [--levels 12,24,48,96]
    movingpme mass-table   --config exp.ini --out results/
    movingpme mesh-gen     disk --radius 3.14159 --rings 18 --out mesh.txt

Exit status: 0 on success, 2 for an invalid configuration or arguments
(nothing is written), 1 when a run fails.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .diagnostics import waiting_time_estimate
from .errors import AssumptionError, ConvergenceError, DomainError, FormatError, PivotError
from .experiments import converge, mass_table, run_config
from .io import write_csv, write_json, write_snapshot
from .mesh2d import disk_mesh, horseshoe_mesh, mesh_quality, square_mesh, write_mesh

log = logging.getLogger("movingpme")

DIAG_COLUMNS_1D = ["t", "energy", "dissipation", "total_mass", "mass_vector_norm", "a", "b",
                   "fp_iters", "rate_residual", "flags"]
DIAG_COLUMNS_2D = ["t", "energy", "dissipation", "total_mass", "mass_vector_norm",
                   "boundary_hash", "r_min", "r_max", "r_mean", "fp_iters", "rate_residual",
                   "flags"]


def _load(args):
    cfg = load_config(args.config)
    changes = {}
    if args.strict:
        changes["strict"] = True
    if args.quad_order is not None:
        if args.quad_order < 1:
            raise ConfigError("--quad-order must be at least 1")
        changes["quad_order"] = args.quad_order
    if changes:
        cfg = dataclasses.replace(cfg, scheme=dataclasses.replace(cfg.scheme, **changes))
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run(cfg, out: Path):
    m = cfg.problem.m
    every = cfg.output.snapshot_every

    def snapshots(k, t, state, row, rep):
        if every and k % every == 0:
            write_snapshot(state, out / f"snapshot_{k:06d}.txt", m, t)

    _, rec = run_config(cfg, observers=(snapshots,))
    cols = DIAG_COLUMNS_1D if cfg.problem.dim == 1 else DIAG_COLUMNS_2D
    write_csv(out / "diag.csv", cols, [r.as_dict() for r in rec.rows])
    write_snapshot(rec.final_state, out / "final.txt", m, rec.t_final)
    last = rec.rows[-1].as_dict()
    summary = {
        "t_final": rec.t_final,
        "steps": len(rec.rows) - 1,
        "stop_reason": rec.stop_reason,
        "flags": rec.flags,
        "final": {k: v for k, v in last.items() if k != "flags"},
        "waiting_time": waiting_time_estimate(rec, cfg.output.waiting_delta),
    }
    write_json(out / "summary.json", summary)
    return rec


def cmd_run(args, estimate_waiting=False):
    cfg = _load(args)
    rec = _run(cfg, _outdir(args))
    if estimate_waiting:
        wt = waiting_time_estimate(rec, cfg.output.waiting_delta)
        print(f"waiting time estimate: {wt}")
    print(f"{rec.stop_reason}; t = {rec.t_final:.6g}")
    return 0 if rec.stop_reason == "completed" or "tangled" in rec.stop_reason else 1


def _levels(args, cfg):
    if args.levels:
        try:
            levels = [int(x) for x in args.levels.split(",")]
        except ValueError:
            raise ConfigError(f"--levels: cannot parse {args.levels!r}") from None
    else:
        levels = cfg.levels
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError(f"need at least two increasing levels, got {levels}")
    return levels


def cmd_converge(args):
    cfg = _load(args)
    levels = _levels(args, cfg)
    if cfg.problem.initial != "barenblatt":
        raise ConfigError("[problem] initial: convergence needs barenblatt data")
    rows = converge(cfg, levels)
    write_csv(_outdir(args) / "converge.csv", ["level", "N", "tau", "err_L2", "order", "flags"],
              rows)
    for r in rows:
        order = "" if r["order"] is None else f"{r['order']:.4f}"
        print(f"N={r['N']:6d} tau={r['tau']:.3e} err={r['err_L2']:.4e} {order}")
    return 0


def cmd_mass_table(args):
    cfg = _load(args)
    levels = _levels(args, cfg)
    if cfg.problem.dim != 1:
        raise ConfigError("[problem] dim: the mass table is a 1D experiment")
    rows = mass_table(cfg, levels)
    write_csv(_outdir(args) / "mass_table.csv",
              ["N", "tau", "mass_t0", "mass_T", "mass_error", "err_vs_exact", "order"], rows)
    for r in rows:
        order = "" if r["order"] is None else f"{r['order']:.4f}"
        print(f"N={r['N']:4d} tau={r['tau']:.3e} mass error={r['mass_error']:.4e} {order}")
    return 0


def cmd_mesh_gen(args):
    if args.kind == "disk":
        mesh = disk_mesh(args.radius, args.rings)
    elif args.kind == "square":
        mesh = square_mesh((args.lo, args.hi), args.n)
    else:
        mesh = horseshoe_mesh(args.h)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_mesh(mesh, out)
    q = mesh_quality(mesh)
    print(f"{mesh.n_vertices} vertices, {mesh.n_cells} cells, min angle {q.min_angle:.2f} deg")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="movingpme", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="experiment INI file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--strict", action="store_true", help="abort on assumption violation")
        p.add_argument("--quad-order", type=int, default=None, help="quadrature order")
        return p

    experiment("run", "run one experiment")
    experiment("waiting-time", "run and report the waiting-time estimate")
    for name in ("converge", "mass-table"):
        p = experiment(name, f"{name} table over mesh levels")
        p.add_argument("--levels", default=None, help="comma separated, e.g. 12,24,48,96")

    p = sub.add_parser("mesh-gen", help="write a 2D mesh file")
    p.add_argument("kind", choices=["disk", "square", "horseshoe"])
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=float, default=3.141592653589793)
    p.add_argument("--rings", type=int, default=18)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--lo", type=float, default=-1.5)
    p.add_argument("--hi", type=float, default=1.5)
    p.add_argument("--h", type=float, default=0.05)
    return parser


COMMANDS = {
    "run": cmd_run,
    "waiting-time": lambda a: cmd_run(a, estimate_waiting=True),
    "converge": cmd_converge,
    "mass-table": cmd_mass_table,
    "mesh-gen": cmd_mesh_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, AssumptionError, PivotError, ConvergenceError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
