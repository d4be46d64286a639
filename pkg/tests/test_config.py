import pytest

from movingpme.config import ConfigError, load_config, parse_config

BASE = """\
[problem]
dim = 1
m = 2
initial = barenblatt
C = 1.0

[mesh]
kind = uniform
N = 24

[scheme]
kind = implicit
tau = 0.01
T = 2.0
"""


def test_valid_config():
    c = parse_config(BASE + "\n[converge]\nlevels = 12, 24\n[output]\nsnapshot_every = 5\n")
    assert c.problem.dim == 1 and c.problem.m == 2 and c.problem.t0 == 1.0
    assert c.mesh.N == 24 and c.mesh.a is None
    assert c.scheme.kind == "implicit" and c.scheme.tau == 0.01 and c.scheme.T == 2.0
    assert c.scheme.eps == 1e-6 and c.scheme.quad_order == 5 and not c.scheme.strict
    assert c.levels == [12, 24] and c.tau_factor == 0.25
    assert c.output.snapshot_every == 5


def test_inline_comments_and_second_order_gap():
    text = BASE.replace("kind = uniform", "kind = bestfit   # adapted\nmin_gap = second-order")
    assert parse_config(text).mesh.min_gap == "second-order"
    text = BASE.replace("kind = uniform", "kind = bestfit\nmin_gap = 1e-4")
    assert parse_config(text).mesh.min_gap == 1e-4


def _line(text, needle):
    return next(i for i, l in enumerate(text.splitlines(), 1) if l.startswith(needle))


@pytest.mark.parametrize("old,new,needle,match", [
    ("C = 1.0", "C = 1.0\ncolour = red", "colour", "unknown field"),
    ("dim = 1", "dim = 2", "kind = uniform", "not available for dim=2"),
    ("m = 2", "m = 1", "m =", "must exceed 1"),
    ("tau = 0.01", "tau = -1", "tau", "must be positive"),
    ("tau = 0.01", "tau = fast", "tau", "cannot parse"),
    ("T = 2.0", "T = 0.5", "T =", "precedes"),
    ("N = 24", "N = 1", "N =", "N >= 2"),
    ("kind = implicit", "kind = rk4", "kind = rk4", "unknown kind"),
    ("kind = uniform", "kind = disk", "kind = disk", "not available for dim=1"),
])
def test_invalid_values_name_their_line(old, new, needle, match):
    text = BASE.replace(old, new)
    with pytest.raises(ConfigError, match=match) as exc:
        parse_config(text)
    assert exc.value.line == _line(text, needle)


def test_waiting1d_in_2d_rejected_with_line():
    text = BASE.replace("dim = 1", "dim = 2").replace("initial = barenblatt", "initial = waiting1d")
    with pytest.raises(ConfigError, match="waiting1d") as exc:
        parse_config(text)
    assert exc.value.line == 4


def test_unknown_section_and_missing_fields():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(BASE + "[extra]\nx = 1\n")
    with pytest.raises(ConfigError, match="missing required field"):
        parse_config(BASE.replace("tau = 0.01\n", ""))
    with pytest.raises(ConfigError, match="missing section"):
        parse_config(BASE.split("[scheme]")[0])
    with pytest.raises(ConfigError, match="only the explicit"):
        parse_config(BASE.replace("dim = 1", "dim = 2").replace("kind = uniform", "kind = disk"))


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "none.ini")
    p = tmp_path / "c.ini"
    p.write_text(BASE)
    assert load_config(p).source == str(p)
