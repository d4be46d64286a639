"""Experiment configuration files.

INI syntax (``key = value`` under ``[section]`` headers, ``#`` comments)::

    [problem]
    dim = 1                 # 1 or 2
    m = 2
    initial = barenblatt    # barenblatt | waiting1d | waiting2d | horseshoe | two-peak | snapshot
    C = 1.0                 # barenblatt
    t0 = 1.0                # barenblatt start time (others start at 0)
    theta = 0.0             # waiting1d
    path = snap.txt         # snapshot

    [mesh]
    kind = uniform          # uniform | bestfit | file | disk | square | horseshoe
    N = 48                  # uniform, bestfit: cell count
    a = -3.4641             # uniform, bestfit: interval (default: support of the data)
    b = 3.4641
    min_gap = 1e-4          # bestfit: float or "second-order"
    radius = 3.14159        # disk
    rings = 18              # disk
    n = 30                  # square
    bounds = -1.5, 1.5      # square
    h = 0.05                # horseshoe
    path = mesh.txt         # file

    [scheme]
    kind = implicit         # explicit | implicit | modified-explicit | modified-implicit
    tau = 0.01
    T = 2.0
    eps = 1e-6
    max_fp_iter = 100
    quad_order = 5
    strict = false

    [output]
    snapshot_every = 0      # steps between snapshots, 0 disables
    waiting_delta = 0.0025  # threshold of the waiting-time estimator

    [converge]
    levels = 12, 24, 48, 96
    tau_factor = 0.25
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError
from .stepping import SCHEME_KINDS, SchemeConfig

INITIAL_KINDS = {
    "barenblatt": (1, 2),
    "waiting1d": (1,),
    "waiting2d": (2,),
    "horseshoe": (2,),
    "two-peak": (2,),
    "snapshot": (1, 2),
}
MESH_KINDS = {
    "uniform": (1,),
    "bestfit": (1,),
    "file": (2,),
    "disk": (2,),
    "square": (2,),
    "horseshoe": (2,),
}
KNOWN = {
    "problem": {"dim", "m", "initial", "c", "t0", "theta", "path"},
    "mesh": {"kind", "n", "a", "b", "min_gap", "radius", "rings", "bounds", "h", "path"},
    "scheme": {"kind", "tau", "t", "eps", "max_fp_iter", "quad_order", "strict"},
    "output": {"snapshot_every", "waiting_delta"},
    "converge": {"levels", "tau_factor"},
}


class ConfigError(FormatError):
    """Invalid configuration, located by section, key and line."""


@dataclass
class ProblemSpec:
    dim: int
    m: float
    initial: str
    C: float = 1.0
    t0: float = 0.0
    theta: float = 0.0
    path: str | None = None


@dataclass
class MeshSpec:
    kind: str
    N: int | None = None
    a: float | None = None
    b: float | None = None
    min_gap: float | str | None = None
    radius: float = math.pi
    rings: int = 18
    n: int = 30
    bounds: tuple = (-1.5, 1.5)
    h: float = 0.05
    path: str | None = None


@dataclass
class OutputSpec:
    snapshot_every: int = 0
    waiting_delta: float | None = None


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    mesh: MeshSpec
    scheme: SchemeConfig
    output: OutputSpec = field(default_factory=OutputSpec)
    levels: list = field(default_factory=list)
    tau_factor: float = 0.25
    source: str | None = None


def _line_of(text: str, section: str, key: str | None = None):
    cur = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            cur = m.group(1).strip().lower()
            if key is None and cur == section:
                return no
            continue
        if cur == section and key is not None:
            k = re.split(r"[=:]", line, 1)[0].strip().lower()
            if k == key:
                return no
    return None


class _Reader:
    def __init__(self, cp, text):
        self.cp = cp
        self.text = text

    def fail(self, section, key, msg):
        where = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{where}: {msg}", _line_of(self.text, section, key))

    def has(self, section, key):
        return self.cp.has_option(section, key)

    def raw(self, section, key, default=None, required=False):
        if self.cp.has_option(section, key):
            return self.cp.get(section, key).split("#")[0].strip()
        if required:
            self.fail(section, key, "missing required field")
        return default

    def get(self, section, key, conv, default=None, required=False):
        raw = self.raw(section, key, None, required)
        if raw is None:
            return default
        try:
            return conv(raw)
        except ValueError:
            self.fail(section, key, f"cannot parse {raw!r} as {conv.__name__}")

    def boolean(self, section, key, default):
        raw = self.raw(section, key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        self.fail(section, key, f"expected a boolean, got {raw!r}")


def _floats(raw):
    return tuple(float(x) for x in raw.replace(",", " ").split())


def _gap(raw):
    return raw.lower() if raw.lower() == "second-order" else float(raw)


_gap.__name__ = "float or 'second-order'"


def _ints(raw):
    return [int(x) for x in raw.replace(",", " ").split()]


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], line) from None
    r = _Reader(cp, text)
    for sec in cp.sections():
        if sec not in KNOWN:
            r.fail(sec, None, f"unknown section (expected one of {sorted(KNOWN)})")
        for key in cp.options(sec):
            if key not in KNOWN[sec]:
                r.fail(sec, key, "unknown field")
    for sec in ("problem", "mesh", "scheme"):
        if not cp.has_section(sec):
            raise ConfigError(f"[{sec}]: missing section")

    dim = r.get("problem", "dim", int, required=True)
    if dim not in (1, 2):
        r.fail("problem", "dim", f"must be 1 or 2, got {dim}")
    m = r.get("problem", "m", float, required=True)
    if not m > 1:
        r.fail("problem", "m", f"must exceed 1, got {m}")
    initial = r.raw("problem", "initial", required=True).lower()
    if initial not in INITIAL_KINDS:
        r.fail("problem", "initial", f"unknown kind {initial!r} (expected one of {sorted(INITIAL_KINDS)})")
    if dim not in INITIAL_KINDS[initial]:
        r.fail("problem", "initial", f"{initial!r} is not available for dim={dim}")
    problem = ProblemSpec(
        dim=dim, m=m, initial=initial,
        C=r.get("problem", "c", float, 1.0),
        t0=r.get("problem", "t0", float, 1.0 if initial == "barenblatt" else 0.0),
        theta=r.get("problem", "theta", float, 0.0),
        path=r.raw("problem", "path"),
    )
    if initial == "barenblatt" and not (problem.C > 0 and problem.t0 > 0):
        r.fail("problem", "c" if problem.C <= 0 else "t0", "barenblatt data needs C > 0 and t0 > 0")
    if initial == "waiting1d" and not 0 <= problem.theta <= 1:
        r.fail("problem", "theta", f"must lie in [0, 1], got {problem.theta}")
    if initial == "snapshot" and not problem.path:
        r.fail("problem", "path", "snapshot initial data needs a path")

    kind = r.raw("mesh", "kind", required=True).lower()
    if kind not in MESH_KINDS:
        r.fail("mesh", "kind", f"unknown kind {kind!r} (expected one of {sorted(MESH_KINDS)})")
    if initial != "snapshot" and dim not in MESH_KINDS[kind]:
        r.fail("mesh", "kind", f"{kind!r} meshes are not available for dim={dim}")
    mesh = MeshSpec(
        kind=kind,
        N=r.get("mesh", "n", int),
        a=r.get("mesh", "a", float),
        b=r.get("mesh", "b", float),
        min_gap=r.get("mesh", "min_gap", _gap),
        radius=r.get("mesh", "radius", float, math.pi),
        rings=r.get("mesh", "rings", int, 18),
        bounds=r.get("mesh", "bounds", _floats, (-1.5, 1.5)),
        h=r.get("mesh", "h", float, 0.05),
        path=r.raw("mesh", "path"),
    )
    if kind in ("uniform", "bestfit"):
        if mesh.N is None:
            r.fail("mesh", "n", f"{kind} mesh needs N")
        if mesh.N < 2:
            r.fail("mesh", "n", f"need N >= 2, got {mesh.N}")
        if (mesh.a is None) != (mesh.b is None):
            r.fail("mesh", "a" if mesh.a is None else "b", "give both a and b or neither")
        if mesh.a is not None and not mesh.a < mesh.b:
            r.fail("mesh", "b", f"need a < b, got [{mesh.a}, {mesh.b}]")
    if kind == "square":
        mesh.n = r.get("mesh", "n", int, 30)
        if len(mesh.bounds) not in (2, 4):
            r.fail("mesh", "bounds", "expected 'lo, hi' or 'x0, x1, y0, y1'")
    if kind == "disk" and (mesh.rings < 1 or not mesh.radius > 0):
        r.fail("mesh", "rings", "disk mesh needs rings >= 1 and radius > 0")
    if kind == "file" and not mesh.path:
        r.fail("mesh", "path", "file mesh needs a path")

    skind = r.raw("scheme", "kind", "implicit" if dim == 1 else "explicit").lower()
    if skind not in SCHEME_KINDS:
        r.fail("scheme", "kind", f"unknown kind {skind!r} (expected one of {list(SCHEME_KINDS)})")
    if dim == 2 and skind != "explicit":
        r.fail("scheme", "kind", "only the explicit scheme is available in 2D")
    tau = r.get("scheme", "tau", float, required=True)
    if not tau > 0:
        r.fail("scheme", "tau", f"must be positive, got {tau}")
    T = r.get("scheme", "t", float, required=True)
    t0 = problem.t0
    if not T >= t0:
        r.fail("scheme", "t", f"final time {T} precedes the start time {t0}")
    eps = r.get("scheme", "eps", float, 1e-6)
    if not eps > 0:
        r.fail("scheme", "eps", f"must be positive, got {eps}")
    max_fp = r.get("scheme", "max_fp_iter", int, 100)
    if max_fp < 1:
        r.fail("scheme", "max_fp_iter", "must be at least 1")
    quad = r.get("scheme", "quad_order", int, 5)
    if quad < 1:
        r.fail("scheme", "quad_order", "must be at least 1")
    scheme = SchemeConfig(kind=skind, tau=tau, T=T, t0=t0, eps=eps, max_fp_iter=max_fp,
                          quad_order=quad, strict=r.boolean("scheme", "strict", False))

    out = OutputSpec(
        snapshot_every=r.get("output", "snapshot_every", int, 0) if cp.has_section("output") else 0,
        waiting_delta=r.get("output", "waiting_delta", float) if cp.has_section("output") else None,
    )
    if out.snapshot_every < 0:
        r.fail("output", "snapshot_every", "must be >= 0")
    levels, factor = [], 0.25
    if cp.has_section("converge"):
        levels = r.get("converge", "levels", _ints, [])
        if any(b <= a for a, b in zip(levels, levels[1:])):
            r.fail("converge", "levels", f"levels must increase, got {levels}")
        factor = r.get("converge", "tau_factor", float, 0.25)
        if not 0 < factor <= 1:
            r.fail("converge", "tau_factor", f"must lie in (0, 1], got {factor}")
    return ExperimentConfig(problem, mesh, scheme, out, levels, factor, source)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))
