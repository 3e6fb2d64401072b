import json
import math

import numpy as np
import pytest

from sdfm.cli import parse_atoms, read_config, run
from sdfm.core import GridSpec, RunReport, make_atoms, save_atoms
from sdfm.flow import integrate_forward, tessellate
from sdfm.io import PALETTE, emit_raster, read_labels_csv, read_raster, write_labels_csv, write_trajectory_csv

from conftest import make_field


def test_raster_two_by_two(tmp_path):
    f = make_field(np.array([[1, 2], [1, 2]]))
    emit_raster(f, tmp_path / "a.pgm")
    data = (tmp_path / "a.pgm").read_bytes()
    assert data.startswith(b"P6\n2 2\n255\n")
    img = read_raster(tmp_path / "a.pgm")
    # first row is y = lo: label 1 in both columns
    np.testing.assert_array_equal(img[0], [PALETTE[0], PALETTE[0]])
    np.testing.assert_array_equal(img[1], [PALETTE[1], PALETTE[1]])


def test_raster_unresolved_white(tmp_path):
    f = make_field(np.zeros((3, 4), dtype=int), n=1)
    emit_raster(f, tmp_path / "w.pgm")
    img = read_raster(tmp_path / "w.pgm")
    assert img.shape == (4, 3, 3) and np.all(img == 255)


def test_raster_rotational_symmetry(tmp_path, four):
    grid = GridSpec.square(1.5, 201)
    emit_raster(tessellate(four, grid), tmp_path / "f.pgm")
    img = read_raster(tmp_path / "f.pgm")
    colors = {tuple(c): k + 1 for k, c in enumerate(PALETTE[:4])}
    lab = np.array([[colors.get(tuple(px), 0) for px in row] for row in img])  # [j, i]
    pts = grid.points()
    ang = 2 * math.pi / 3
    rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    perm = {1: 2, 2: 3, 3: 1, 4: 4, 0: 0}
    hits = total = 0
    for i in range(grid.nx):
        for j in range(grid.ny):
            q = rot @ pts[i, j]
            if abs(q[0]) > 1.5 or abs(q[1]) > 1.5:
                continue
            qi, qj = grid.index_of(q)
            total += 1
            hits += lab[qj, qi] == perm[lab[j, i]]
    assert hits / total >= 0.99


def test_labels_csv_round_trip(tmp_path, ten):
    f = tessellate(ten, GridSpec((-1.0, -2.0), (2.0, 1.5), 13, 9))
    write_labels_csv(f, tmp_path / "l.csv")
    g = read_labels_csv(tmp_path / "l.csv")
    np.testing.assert_array_equal(g.labels, f.labels)
    assert g.grid == f.grid and g.producer == f.producer and g.n == f.n


def test_trajectory_csv(tmp_path, four):
    tr = integrate_forward([0.5, 0.5], four)
    write_trajectory_csv(tr, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,x0,x1,captured"
    assert lines[-1].endswith(f",{tr.captured_by}")
    assert len(lines) == len(tr.times) + 2


def test_parse_atoms(tmp_path):
    assert parse_atoms("fourpoint").n == 4
    assert parse_atoms("tenpoint").n == 10
    assert parse_atoms("random:3:5:3").dim == 3
    save_atoms(make_atoms([(0.0, 1.0), (2.0, 3.0)]), tmp_path / "a.txt")
    assert parse_atoms(str(tmp_path / "a.txt")).n == 2


def test_cells_command(tmp_path):
    code = run(["cells", "--atoms", "fourpoint", "--grid", "-3", "3", "-3", "3", "40", "40", "--out", str(tmp_path), "--laguerre"])
    assert code == 0
    for name in ("fm_cells.pgm", "labels.csv", "report.json", "ot_cells.pgm", "weights.csv"):
        assert (tmp_path / name).exists()
    rep = RunReport.load(tmp_path / "report.json")
    assert rep.command == "cells" and rep.values["fm"]["note"] == "topology at grid resolution"
    assert (tmp_path / "weights.csv").read_text().splitlines()[0] == "k,psi_k,mass_k"


def test_report_values_reparse_exactly(tmp_path):
    run(["laguerre", "--atoms", "fourpoint", "--out", str(tmp_path), "--no-raster"])
    raw = json.loads((tmp_path / "report.json").read_text())
    rep = RunReport.load(tmp_path / "report.json")
    assert rep.values["psi"] == raw["values"]["psi"]
    assert rep.checks[0].measured == raw["checks"][0]["measured"]


def test_usage_errors(tmp_path):
    assert run(["cells", "--grid", "1", "2"]) == 2
    assert run(["nonsense"]) == 2
    assert run(["cells", "--atoms", "random:x:3", "--out", str(tmp_path)]) == 2
    assert run(["cells", "--atoms", str(tmp_path / "missing.txt"), "--out", str(tmp_path)]) == 2
    assert run(["cells", "--grid", "1", "0", "0", "1", "5", "5", "--out", str(tmp_path)]) == 2
    assert run(["velocity-eval", "--t", "0.5", "--point", "1", "2", "3", "--out", str(tmp_path)]) == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# defaults\ngrid = -1 1 -1 1 11 11\ntau-max = 30\nno-raster = true\n")
    assert read_config(cfg)["tau_max"] == "30"
    out = tmp_path / "o"
    assert run(["cells", "--config", str(cfg), "--tau-max", "35", "--out", str(out)]) == 0
    rep = RunReport.load(out / "report.json")
    assert rep.config["tau_max"] == 35.0
    assert rep.config["grid"] == [-1.0, 1.0, -1.0, 1.0, 11.0, 11.0]
    assert not (out / "fm_cells.pgm").exists()


def test_velocity_eval(tmp_path, capsys):
    assert run(["velocity-eval", "--t", "0.5", "--point", "0", "0", "--trajectory", "--out", str(tmp_path)]) == 0
    first = capsys.readouterr().out.splitlines()[0]
    np.testing.assert_allclose(json.loads(first)["velocity"], [0.0, 0.0], atol=1e-15)
    assert (tmp_path / "trajectory.csv").exists()


def test_check_failure_exit_code(tmp_path):
    # an increasing eps list is a usage error; a failed check exits 1
    assert run(["eps-sweep", "--eps", "0.1", "0.2", "--out", str(tmp_path)]) == 2
    code = run(["eps-sweep", "--atoms", "tenpoint", "--grid", "-3", "3", "-3", "3", "21", "21",
                "--eps", "0.75", "--out", str(tmp_path), "--no-raster", "--no-csv"])
    assert code == 1


def test_counterexample_command(tmp_path):
    assert run(["counterexample", "--out", str(tmp_path), "--grid", "-1.5", "1.5", "-1.5", "1.5", "200", "200"]) == 0
    assert (tmp_path / "ot_cells.pgm").exists()
