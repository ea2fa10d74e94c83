"""End-to-end checks of the command line front end.

Each test writes a small INI file, invokes main() in process, and
inspects exit code, stdout JSON, and the files left in the output
directory.
"""

import json
import math
import os

import pytest

from magsurf.cli import main

PERIOD_TOL = 1e-6


def _write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _run(capsys, tmp_path, text, command, extra=()):
    cfg = _write(tmp_path, text)
    out = tmp_path / "out"
    code = main([command, cfg, "--out", str(out)] + list(extra))
    captured = capsys.readouterr()
    return code, captured.out, out


SPHERE_ORACLE = """\
[surface]
kind = sphere

[field]
type = constant
value = 1.0

[run]
s = 1.0
"""


def test_oracle_output_deterministic(capsys, tmp_path):
    """Two identical runs must print byte-identical JSON."""
    code1, out1, _ = _run(capsys, tmp_path, SPHERE_ORACLE, "oracle")
    code2, out2, _ = _run(capsys, tmp_path, SPHERE_ORACLE, "oracle")
    assert code1 == 0 and code2 == 0
    assert out1 == out2
    data = json.loads(out1)
    assert list(data) == ["radius", "period"]
    assert data["radius"] == round(math.atan(1.0), 8)
    assert data["period"] == round(2.0 * math.pi / math.sqrt(2.0), 8)


def test_oracle_subcritical_exit_code(capsys, tmp_path):
    text = """\
[surface]
kind = hyperbolic
genus = 2

[field]
type = constant
value = 1.0

[run]
s = 0.8
"""
    code, _, out = _run(capsys, tmp_path, text, "oracle")
    assert code == 1
    data = json.loads((out / "result.json").read_text())
    assert data["exists_contractible"] is False


def test_config_rejects_both_energy_keys(capsys, tmp_path):
    text = SPHERE_ORACLE + "k = 0.5\n"
    code, _, _ = _run(capsys, tmp_path, text, "oracle")
    assert code == 2


def test_config_rejects_unknown_key(capsys, tmp_path):
    text = SPHERE_ORACLE.replace("[run]", "[run]\nbogus = 1")
    code, _, _ = _run(capsys, tmp_path, text, "oracle")
    assert code == 2


def test_config_rejects_unknown_section(capsys, tmp_path):
    text = SPHERE_ORACLE + "\n[extras]\nfoo = 1\n"
    code, _, _ = _run(capsys, tmp_path, text, "oracle")
    assert code == 2


def test_simulate_writes_trajectory(capsys, tmp_path):
    text = """\
[surface]
kind = flat_torus

[field]
type = constant
value = 1.0

[run]
s = 2.0
t_end = 5.0
"""
    code, out_text, out = _run(capsys, tmp_path, text, "simulate")
    assert code == 0
    summary = json.loads(out_text)
    assert summary["energy_drift"] < 1e-9
    assert not summary["truncated"]
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,chart,u,v,du,dv,energy,kappa"
    assert len(lines) > 100
    assert (out / "plot.gp").exists()
    assert json.loads((out / "result.json").read_text()) == summary


def test_orbit_shoot_matches_oracle(capsys, tmp_path):
    text = """\
[surface]
kind = flat_torus

[field]
type = constant
value = 1.0

[run]
s = 2.0
seed_u = 0.25
"""
    code, out_text, _ = _run(capsys, tmp_path, text, "orbit-shoot")
    assert code == 0
    summary = json.loads(out_text)
    assert abs(summary["period"] - 2.0 * math.pi) < PERIOD_TOL
    assert abs(summary["radius"] - 0.5) < 1e-6
    assert summary["winding"] == [0, 0]


def test_critical_quantity(capsys, tmp_path):
    text = """\
[surface]
kind = hyperbolic
genus = 2

[field]
type = constant
value = 1.0

[run]
quantity = c_h
"""
    code, out_text, _ = _run(capsys, tmp_path, text, "critical")
    assert code == 0
    area = 4.0 * math.pi
    flux = -2.0 * math.pi * (2 - 2 * 2)
    expected = flux ** 2 / (4.0 * math.pi * 2.0 * area)
    assert abs(json.loads(out_text)["c_h"] - expected) < 1e-12


def test_contact_check_sphere(capsys, tmp_path):
    text = """\
[surface]
kind = sphere

[field]
type = constant
value = 1.0

[run]
s = 1.0
candidate = homogeneous
"""
    code, out_text, _ = _run(capsys, tmp_path, text, "contact-check")
    assert code == 0
    summary = json.loads(out_text)
    assert summary["verdict"] == "positive"
    assert summary["min"] > 0.0


def test_sweep_runs_all_values(capsys, tmp_path):
    text = """\
[surface]
kind = flat_torus

[field]
type = constant
value = 1.0

[run]
s_values = 0.5, 1.0, 2.0
workers = 3
"""
    code, out_text, _ = _run(capsys, tmp_path, text, "sweep")
    assert code == 0
    runs = json.loads(out_text)["runs"]
    assert [r["s"] for r in runs] == [0.5, 1.0, 2.0]
    for r in runs:
        assert r["exists_contractible"]
        assert abs(r["period"] - 2.0 * math.pi) < PERIOD_TOL


def test_missing_config_file(capsys, tmp_path):
    code = main(["oracle", str(tmp_path / "absent.ini")])
    capsys.readouterr()
    assert code == 2
