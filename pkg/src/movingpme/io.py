"""Snapshot and table files.

1D snapshot::

    pme-snapshot v1 dim=1 m=<m> t=<t>
    <x_0> 0
    <x_1> <rho_1>
    ...
    <x_N> 0

2D snapshot: the same header with ``dim=2``, the ``V``/``C`` sections of the
mesh format, then ``RHO <count>`` and one ``<vertex id> <value>`` line per
interior vertex.  Numbers are written with 17 significant digits so a round
trip reproduces every double exactly.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .mesh1d import Mesh1D, State1D
from .mesh2d import _Lines, _read_mesh_body, _read_text, _write_mesh_body, _write_text
from .solver2d import State2D


def fmt(x) -> str:
    return f"{float(x):.17g}"


@dataclass
class SnapshotMeta:
    dim: int
    m: float
    t: float


def write_snapshot(state, dest, m: float, t: float) -> None:
    buf = io.StringIO()
    if isinstance(state, State1D):
        buf.write(f"pme-snapshot v1 dim=1 m={fmt(m)} t={fmt(t)}\n")
        for x, r in zip(state.x, state.nodal()):
            buf.write(f"{fmt(x)} {fmt(r)}\n")
    else:
        buf.write(f"pme-snapshot v1 dim=2 m={fmt(m)} t={fmt(t)}\n")
        _write_mesh_body(state.mesh, buf, header=False)
        buf.write(f"RHO {state.rho.size}\n")
        for i, r in zip(state.mesh.interior, state.rho):
            buf.write(f"{i} {fmt(r)}\n")
    _write_text(dest, buf.getvalue())


def _parse_header(tok, cur) -> SnapshotMeta:
    if len(tok) != 5 or tok[:2] != ["pme-snapshot", "v1"]:
        raise FormatError("expected header 'pme-snapshot v1 dim=<d> m=<m> t=<t>'", cur.lineno)
    fields = {}
    for item in tok[2:]:
        key, sep, val = item.partition("=")
        if not sep:
            raise FormatError(f"malformed header field {item!r}", cur.lineno)
        fields[key] = val
    try:
        meta = SnapshotMeta(int(fields["dim"]), float(fields["m"]), float(fields["t"]))
    except (KeyError, ValueError):
        raise FormatError("header needs dim=, m= and t= fields", cur.lineno) from None
    if meta.dim not in (1, 2):
        raise FormatError(f"unsupported dimension {meta.dim}", cur.lineno)
    return meta


def _read_1d(cur: _Lines) -> State1D:
    xs, rs = [], []
    while True:
        while cur.pos < len(cur.lines) and not cur.lines[cur.pos].strip():
            cur.pos += 1
        if cur.pos >= len(cur.lines):
            break
        tok = cur.next("'<x> <rho>' line")
        if len(tok) != 2:
            raise FormatError("expected '<x> <rho>'", cur.lineno)
        try:
            xs.append(float(tok[0]))
            rs.append(float(tok[1]))
        except ValueError:
            raise FormatError("bad number", cur.lineno) from None
    if len(xs) < 3:
        raise FormatError(f"expected at least 3 '<x> <rho>' lines, got {len(xs)}", cur.lineno + 1)
    if rs[0] != 0.0 or rs[-1] != 0.0:
        raise FormatError("boundary knots must carry rho = 0", cur.lineno)
    return State1D(Mesh1D(np.array(xs)), np.array(rs[1:-1]))


def _read_2d(cur: _Lines) -> State2D:
    mesh = _read_mesh_body(cur)
    head = cur.next("'RHO <count>' section")
    if len(head) != 2 or head[0] != "RHO":
        raise FormatError("expected 'RHO <count>' section", cur.lineno)
    try:
        count = int(head[1])
    except ValueError:
        raise FormatError("bad RHO count", cur.lineno) from None
    interior = mesh.interior
    if count != interior.size:
        raise FormatError(f"RHO count {count} != {interior.size} interior vertices", cur.lineno)
    pos = {int(v): k for k, v in enumerate(interior)}
    rho = np.full(count, np.nan)
    for _ in range(count):
        tok = cur.next("'<vertex id> <value>' line")
        if len(tok) != 2:
            raise FormatError("expected '<vertex id> <value>'", cur.lineno)
        try:
            vid, val = int(tok[0]), float(tok[1])
        except ValueError:
            raise FormatError("bad RHO entry", cur.lineno) from None
        if vid not in pos:
            raise FormatError(f"vertex {vid} is not an interior vertex", cur.lineno)
        rho[pos[vid]] = val
    if np.isnan(rho).any():
        raise FormatError("RHO section misses some interior vertices", cur.lineno)
    return State2D(mesh, rho)


def read_snapshot(src, with_meta: bool = False):
    """Parse a snapshot; with ``with_meta`` also return its :class:`SnapshotMeta`."""
    cur = _Lines(_read_text(src))
    meta = _parse_header(cur.next("snapshot header"), cur)
    state = _read_1d(cur) if meta.dim == 1 else _read_2d(cur)
    return (state, meta) if with_meta else state


def write_csv(path, header, rows) -> None:
    """CSV with LF endings; floats at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(row[h]) for h in header])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return v


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")
