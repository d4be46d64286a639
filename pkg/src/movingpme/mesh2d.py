"""Triangulations for the 2D solver: generators, quality checks and file I/O.

Mesh file format (text, 0-based indices)::

    pme-mesh v1
    V <count>
    <id> <x> <y> <boundary 0|1>
    ...
    C <count>
    <id> <v1> <v2> <v3>
    ...
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError


@dataclass
class TriMesh:
    vertices: np.ndarray   # (n, 2)
    cells: np.ndarray      # (nc, 3) counter-clockwise
    boundary: np.ndarray   # (n,) bool

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        self.cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 3)
        self.boundary = np.asarray(self.boundary, dtype=bool)
        if self.boundary.shape != (self.vertices.shape[0],):
            raise DomainError("boundary flags must match the vertex count")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    def signed_areas(self, vertices=None) -> np.ndarray:
        P = (self.vertices if vertices is None else vertices)[self.cells]
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def moved(self, vertices) -> "TriMesh":
        return TriMesh(vertices, self.cells, self.boundary)


@dataclass(frozen=True)
class MeshQuality:
    min_area: float
    min_angle: float   # degrees
    tangled: bool


def mesh_quality(mesh: TriMesh) -> MeshQuality:
    areas = mesh.signed_areas()
    P = mesh.vertices[mesh.cells]
    angles = []
    for a in range(3):
        u = P[:, (a + 1) % 3] - P[:, a]
        w = P[:, (a + 2) % 3] - P[:, a]
        cos = np.sum(u * w, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
    min_angle = float(np.min(angles)) if mesh.n_cells else 0.0
    min_area = float(areas.min()) if mesh.n_cells else 0.0
    return MeshQuality(min_area, min_angle, bool(min_area <= 0))


def disk_mesh(radius: float, n_rings: int, center=(0.0, 0.0)) -> TriMesh:
    """Concentric rings, ring k holding 6k equally spaced vertices."""
    if n_rings < 1:
        raise DomainError("need at least one ring")
    cx, cy = center
    verts = [(cx, cy)]
    starts = [0]
    for k in range(1, n_rings + 1):
        starts.append(len(verts))
        r = radius * k / n_rings
        for j in range(6 * k):
            a = 2 * math.pi * j / (6 * k)
            verts.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    cells = []
    for j in range(6):
        cells.append((0, 1 + j, 1 + (j + 1) % 6))
    for k in range(2, n_rings + 1):
        n0, n1 = 6 * (k - 1), 6 * k
        s0, s1 = starts[k - 1], starts[k]
        i = j = 0
        while i < n0 or j < n1:
            # zip the two rings together in angular order
            a0 = (i + 1) / n0
            a1 = (j + 1) / n1
            if j < n1 and (i == n0 or a1 <= a0):
                cells.append((s0 + i % n0, s1 + j, s1 + (j + 1) % n1))
                j += 1
            else:
                cells.append((s0 + i, s1 + j % n1, s0 + (i + 1) % n0))
                i += 1
    boundary = np.zeros(len(verts), dtype=bool)
    boundary[starts[-1]:] = True
    return TriMesh(np.array(verts), np.array(cells), boundary)


def square_mesh(bounds=(-1.5, 1.5), n: int = 30) -> TriMesh:
    """Structured (n+1)^2 grid, each square split along the diagonal that points
    away from the centre so no corner triangle has three boundary vertices."""
    if n < 1:
        raise DomainError("need n >= 1")
    if len(bounds) == 2:
        x0, x1 = y0, y1 = bounds
    else:
        x0, x1, y0, y1 = bounds
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if (2 * i + 1 < n) == (2 * j + 1 < n):
                cells += [(a, b, c), (a, c, d)]
            else:
                cells += [(a, b, d), (b, c, d)]
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    boundary = ((ii == 0) | (ii == n) | (jj == 0) | (jj == n)).ravel()
    return TriMesh(verts, np.array(cells), boundary)


def _horseshoe_boundary(h):
    pieces = []

    def arc(cx, cy, r, a0, a1):
        n = max(2, int(math.ceil(abs(a1 - a0) * r / h)))
        a = np.linspace(a0, a1, n + 1)[:-1]
        return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)])

    pieces.append(arc(0, 0, 1.0, math.pi / 2, 2 * math.pi))          # outer, ccw
    pieces.append(arc(0.75, 0, 0.25, 0.0, math.pi))                   # right cap
    pieces.append(arc(0, 0, 0.5, 2 * math.pi, math.pi / 2))           # inner, cw
    pieces.append(arc(0, 0.75, 0.25, -math.pi / 2, math.pi / 2))      # top cap
    return np.vstack(pieces)


def in_horseshoe(x, y, tol=0.0):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    q = 0.25 + tol
    arc = (r >= 0.5 - tol) & (r <= 1.0 + tol) & ((x <= tol) | (y <= tol))
    top = (np.hypot(x, y - 0.75) <= q) & (x >= -tol)
    right = (np.hypot(x - 0.75, y) <= q) & (y >= -tol)
    return arc | top | right


def horseshoe_mesh(h: float = 0.05) -> TriMesh:
    """Delaunay mesh of the horseshoe support with spacing about ``h``."""
    from scipy.spatial import Delaunay, cKDTree

    bnd = _horseshoe_boundary(h)
    dy = h * math.sqrt(3) / 2
    xs = np.arange(-1.0, 1.0 + h, h)
    ys = np.arange(-1.0, 1.0 + dy, dy)
    pts = []
    for j, y in enumerate(ys):
        shift = 0.5 * h if j % 2 else 0.0
        pts.append(np.column_stack([xs + shift, np.full(xs.size, y)]))
    lattice = np.vstack(pts)
    lattice = lattice[in_horseshoe(lattice[:, 0], lattice[:, 1])]
    dist, _ = cKDTree(bnd).query(lattice)
    lattice = lattice[dist > 0.6 * h]
    verts = np.vstack([bnd, lattice])
    tri = Delaunay(verts).simplices
    cen = verts[tri].mean(axis=1)
    keep = in_horseshoe(cen[:, 0], cen[:, 1])
    tri = tri[keep]
    boundary = np.zeros(verts.shape[0], dtype=bool)
    boundary[: bnd.shape[0]] = True
    mesh = TriMesh(verts, tri, boundary)
    flip = mesh.signed_areas() < 0
    mesh.cells[flip] = mesh.cells[flip][:, [0, 2, 1]]
    used = np.unique(mesh.cells)
    if used.size != mesh.n_vertices:
        remap = -np.ones(mesh.n_vertices, dtype=np.int64)
        remap[used] = np.arange(used.size)
        mesh = TriMesh(verts[used], remap[mesh.cells], boundary[used])
    return mesh


def write_mesh(mesh: TriMesh, dest) -> None:
    buf = io.StringIO()
    _write_mesh_body(mesh, buf)
    _write_text(dest, buf.getvalue())


def _write_text(dest, text):
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def _write_mesh_body(mesh: TriMesh, buf, header=True):
    if header:
        buf.write("pme-mesh v1\n")
    buf.write(f"V {mesh.n_vertices}\n")
    for i, ((x, y), b) in enumerate(zip(mesh.vertices, mesh.boundary)):
        buf.write(f"{i} {x:.17g} {y:.17g} {int(b)}\n")
    buf.write(f"C {mesh.n_cells}\n")
    for i, (a, b, c) in enumerate(mesh.cells):
        buf.write(f"{i} {a} {b} {c}\n")


class _Lines:
    """Line cursor that reports 1-based positions in parse errors."""

    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, expect):
        while self.pos < len(self.lines) and not self.lines[self.pos].strip():
            self.pos += 1
        if self.pos >= len(self.lines):
            raise FormatError(f"unexpected end of file, expected {expect}", self.pos + 1)
        self.pos += 1
        return self.lines[self.pos - 1].split()

    @property
    def lineno(self):
        return self.pos


def _read_mesh_body(cur: _Lines) -> TriMesh:
    head = cur.next("'V <count>' section")
    if len(head) != 2 or head[0] != "V":
        raise FormatError("expected 'V <count>' section", cur.lineno)
    nv = _int(head[1], cur)
    verts = np.zeros((nv, 2))
    bnd = np.zeros(nv, dtype=bool)
    for _ in range(nv):
        tok = cur.next("vertex line")
        if len(tok) != 4:
            raise FormatError("vertex line needs '<id> <x> <y> <boundary>'", cur.lineno)
        i = _int(tok[0], cur)
        if not 0 <= i < nv:
            raise FormatError(f"vertex id {i} out of range", cur.lineno)
        try:
            verts[i] = float(tok[1]), float(tok[2])
        except ValueError:
            raise FormatError("bad vertex coordinate", cur.lineno) from None
        bnd[i] = tok[3] == "1"
    head = cur.next("'C <count>' section")
    if len(head) != 2 or head[0] != "C":
        raise FormatError("expected 'C <count>' section", cur.lineno)
    nc = _int(head[1], cur)
    cells = np.zeros((nc, 3), dtype=np.int64)
    for _ in range(nc):
        tok = cur.next("cell line")
        if len(tok) != 4:
            raise FormatError("cell line needs '<id> <v1> <v2> <v3>'", cur.lineno)
        i = _int(tok[0], cur)
        if not 0 <= i < nc:
            raise FormatError(f"cell id {i} out of range", cur.lineno)
        cells[i] = [_int(t, cur) for t in tok[1:]]
        if cells[i].min() < 0 or cells[i].max() >= nv:
            raise FormatError("cell references a missing vertex", cur.lineno)
    mesh = TriMesh(verts, cells, bnd)
    if nc and mesh.signed_areas().min() <= 0:
        bad = int(np.argmin(mesh.signed_areas()))
        raise FormatError(f"cell {bad} is not positively oriented", cur.lineno)
    return mesh


def _int(tok, cur):
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"expected an integer, got {tok!r}", cur.lineno) from None


def _read_text(src):
    if hasattr(src, "read"):
        return src.read()
    return Path(src).read_text()


def read_mesh(src) -> TriMesh:
    cur = _Lines(_read_text(src))
    head = cur.next("header 'pme-mesh v1'")
    if head != ["pme-mesh", "v1"]:
        raise FormatError("expected header 'pme-mesh v1'", cur.lineno)
    return _read_mesh_body(cur)
