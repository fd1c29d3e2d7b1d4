from __future__ import annotations

import csv
import json

import pytest

from gsqg_vstates.cli import main, parse_config_text

BASE = """\
# small reference run
params.alpha = 1.5
params.m = 3
params.vartheta = 0
params.d1 = 1.0
params.d2 = 2.0
params.gamma0 = 1.0
params.gamma1 = 1.0
solve.n_modes = 8
solve.n_quad = 64
solve.tol = 1e-10
solve.boundary_nodes = 32
dynamics.t_fraction_of_period = 0.002
dynamics.nodes = 32
dynamics.dt = 5e-4
sweep.axis = "d2"
sweep.grid = [1.5, 2.0, 3.0]
"""


def _config(tmp_path, extra: str = "", name: str = "run.cfg"):
    path = tmp_path / name
    path.write_text(BASE + extra, encoding="utf-8")
    return str(path)


def test_parse_config_text_literals():
    flat = parse_config_text('a.b = 1.5\n# note\nc.d = [1, 2]\ne.f = "x"\ng.h = bare\n')
    assert flat == {"a.b": 1.5, "c.d": [1, 2], "e.f": "x", "g.h": "bare"}


def test_equilibrium_command_writes_json(tmp_path):
    out = tmp_path / "out"
    assert main(["equilibrium", "--config", _config(tmp_path), "--out", str(out)]) == 0
    doc = json.loads((out / "equilibrium.json").read_text())
    assert doc["omega_star"] == pytest.approx(0.25245583771513, rel=1e-13)
    assert doc["gamma2_star"] == pytest.approx(0.84693150531821511, rel=1e-13)


def test_intersecting_rings_exit_two(tmp_path, capsys):
    cfg = tmp_path / "touch.cfg"
    cfg.write_text(BASE.replace("params.d2 = 2.0", "params.d2 = 1.0"), encoding="utf-8")
    assert main(["equilibrium", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "rings intersect" in capsys.readouterr().err


def test_unknown_key_exit_two(tmp_path, capsys):
    assert main(["equilibrium", "--config", _config(tmp_path, "solve.colour = 1\n")]) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_solve_from_zero_target(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", "--config", _config(tmp_path, "solve.targets = [0.0]\n"), "--out", str(out)]) == 0
    doc = json.loads((out / "solve.json").read_text())
    assert doc["states"][0]["iterations"] == 0
    assert doc["failed_target"] is None
    assert not (out / "asymptotics.json").exists()


def test_solve_verify_pipeline_and_negative_control(tmp_path):
    out = tmp_path / "out"
    cfg = _config(tmp_path)
    assert main(["solve", "--config", cfg, "--out", str(out), "--eps-max", "0.2", "--steps", "3"]) == 0
    assert sorted(p.name for p in (out / "vstates").iterdir()) == [
        "eps_0.05.json",
        "eps_0.1.json",
        "eps_0.2.json",
    ]
    assert (out / "boundary_eps_0.2.csv").exists()
    assert json.loads((out / "asymptotics.json").read_text())["leading_mode"] == [3, 2, 2]
    assert all(row["convex"] for row in json.loads((out / "convexity.json").read_text()))

    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    rotation = json.loads((out / "rotation.json").read_text())
    assert rotation["epsilon"] == 0.2
    assert rotation["rel_error"] <= 1e-3
    rows = list(csv.reader((out / "trajectory.csv").open()))
    assert rows[0] == ["t", "patch", "replica", "node", "px", "py"]

    wrong = _config(tmp_path, "dynamics.omega_override = 0.3\n", name="wrong.cfg")
    assert main(["verify", "--config", wrong, "--out", str(out)]) == 4


def test_verify_without_states_exit_five(tmp_path):
    assert main(["verify", "--config", _config(tmp_path), "--out", str(tmp_path / "empty")]) == 5


def test_solver_failure_exit_three(tmp_path):
    cfg = _config(tmp_path, "solve.targets = [0.05, 0.6]\n")
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 3
    doc = json.loads((out / "solve.json").read_text())
    assert doc["failed_target"] == 0.6
    assert len(doc["states"]) == 1


def test_sweep_rows_and_empty_grid(tmp_path):
    out = tmp_path / "out"
    assert main(["sweep", "--config", _config(tmp_path), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert [float(r["value"]) for r in rows] == [1.5, 2.0, 3.0]
    assert rows[1]["status"] == "ok"
    assert float(rows[1]["omega_star"]) == pytest.approx(0.25245583771513, rel=1e-13)
    empty = _config(tmp_path, "sweep.grid = []\n", name="empty.cfg")
    assert main(["sweep", "--config", empty, "--out", str(out)]) == 2


def test_outputs_are_bit_identical_across_runs(tmp_path):
    cfg = _config(tmp_path, "solve.targets = [0.05, 0.1]\n")
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    for name in ("solve.json", "convexity.json", "vstates/eps_0.1.json", "boundary_eps_0.1.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
