import csv
import json
import subprocess
import sys

import pytest

from movingpme.cli import DIAG_COLUMNS_1D, main
from movingpme.diagnostics import convergence_order
from movingpme.io import read_snapshot

CFG = """\
[problem]
dim = 1
m = 2
initial = barenblatt
C = 1.0
t0 = 1.0

[mesh]
kind = uniform
N = 12

[scheme]
kind = {kind}
tau = 0.01
T = {T}

[output]
snapshot_every = 2
"""


def write_cfg(tmp_path, kind="implicit", T=1.0, extra=""):
    p = tmp_path / "exp.ini"
    p.write_text(CFG.format(kind=kind, T=T) + extra)
    return p


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_zero_length_run(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(write_cfg(tmp_path)), "--out", str(out)]) == 0
    lines = (out / "diag.csv").read_text().splitlines()
    assert lines[0] == ",".join(DIAG_COLUMNS_1D) and len(lines) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["steps"] == 0 and summary["stop_reason"] == "completed"
    assert read_snapshot(out / "final.txt").x.size == 13


def test_short_run_writes_snapshots_and_diagnostics(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(write_cfg(tmp_path, T=1.05)), "--out", str(out)]) == 0
    d = rows(out / "diag.csv")
    assert len(d) == 6
    energy = [float(r["energy"]) for r in d]
    assert all(b <= a for a, b in zip(energy, energy[1:]))
    assert sorted(p.name for p in out.glob("snapshot_*.txt")) == [
        "snapshot_000000.txt", "snapshot_000002.txt", "snapshot_000004.txt"]


def test_invalid_config_exits_2_without_output(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text(CFG.format(kind="explicit", T=1.0).replace("dim = 1", "dim = 2")
                 .replace("initial = barenblatt", "initial = waiting1d"))
    out = tmp_path / "out"
    assert main(["run", "--config", str(p), "--out", str(out)]) == 2
    assert not out.exists()
    assert "line 4" in capsys.readouterr().err


def test_bad_override_exits_2(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(write_cfg(tmp_path)), "--out", str(out),
                 "--quad-order", "0"]) == 2
    assert main(["converge", "--config", str(write_cfg(tmp_path)), "--out", str(out),
                 "--levels", "12"]) == 2
    assert not out.exists()


def test_mesh_gen(tmp_path, capsys):
    p = tmp_path / "m" / "disk.txt"
    assert main(["mesh-gen", "disk", "--rings", "4", "--radius", "1", "--out", str(p)]) == 0
    assert "61 vertices, 96 cells" in capsys.readouterr().out
    assert p.read_text().startswith("pme-mesh v1\nV 61\n")


def test_converge_orders_match_errors(tmp_path):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, T=1.02)
    assert main(["converge", "--config", str(cfg), "--out", str(out), "--levels", "6,12"]) == 0
    r = rows(out / "converge.csv")
    assert [int(x["N"]) for x in r] == [6, 12]
    assert float(r[1]["tau"]) == pytest.approx(0.0025)
    errs = [float(x["err_L2"]) for x in r]
    assert float(r[1]["order"]) == pytest.approx(convergence_order(errs, [6, 12])[0], rel=1e-12)
    assert r[0]["order"] == ""


def test_reruns_are_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, kind="explicit", T=1.03)
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    for f in ("diag.csv", "summary.json", "final.txt", "snapshot_000002.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "movingpme.cli", "waiting-time", "--config",
                          str(write_cfg(tmp_path)), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "waiting time estimate" in res.stdout
