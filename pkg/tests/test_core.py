import math

import numpy as np
import pytest

from sdfm.core import (
    UNRESOLVED,
    CheckResult,
    DimensionMismatch,
    DuplicateAtoms,
    FlowConfig,
    GridSpec,
    LabelField,
    RunReport,
    four_point_example,
    load_atoms,
    make_atoms,
    random_atoms,
    save_atoms,
)


def test_single_atom_has_infinite_gap():
    a = make_atoms([(0.0, 0.0)])
    assert a.n == 1 and a.dim == 2
    assert math.isinf(a.min_gap)


def test_four_point_gap_and_radius(four):
    assert four.min_gap == pytest.approx(1.0, abs=1e-15)
    assert four.sep_radius == pytest.approx(0.25, abs=1e-15)
    assert four.n == 4 and four.dim == 2


def test_four_point_atoms(four):
    np.testing.assert_array_equal(four.atoms[2], [1.0, 0.0])
    np.testing.assert_array_equal(four.atoms[3], [0.0, 0.0])
    np.testing.assert_allclose(four.atoms[:3].sum(axis=0), [0.0, 0.0], atol=1e-15)
    for k in range(3):
        ang = 2 * math.pi * (k + 1) / 3
        np.testing.assert_allclose(four.atoms[k], [math.cos(ang), math.sin(ang)], atol=1e-15)


def test_duplicates_rejected():
    with pytest.raises(DuplicateAtoms):
        make_atoms([(0.0, 0.0), (0.0, 0.0)])
    with pytest.raises(DuplicateAtoms):
        make_atoms([(0.0, 0.0), (1e-13, 0.0)])


def test_ragged_points_rejected():
    with pytest.raises(DimensionMismatch):
        make_atoms([(0.0, 0.0), (1.0,)])


def test_sep_radius_must_be_below_half_gap():
    with pytest.raises(ValueError):
        make_atoms([(0.0,), (1.0,)], sep_radius=0.5)
    assert make_atoms([(0.0,), (1.0,)], sep_radius=0.49).sep_radius == 0.49


def test_permutation_keeps_gap():
    pts = np.random.default_rng(1).standard_normal((7, 3))
    a = make_atoms(pts)
    b = make_atoms(pts[::-1])
    assert a.min_gap == b.min_gap
    np.testing.assert_array_equal(a.atoms[::-1], b.atoms)


def test_atoms_file_round_trip(tmp_path):
    a = random_atoms(3, 5, 3)
    save_atoms(a, tmp_path / "a.txt")
    b = load_atoms(tmp_path / "a.txt")
    np.testing.assert_array_equal(a.atoms, b.atoms)
    assert (tmp_path / "a.txt").read_text().splitlines()[0] == "3 5"


def test_atoms_file_header_mismatch(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 3\n0 0\n1 1\n")
    with pytest.raises(DimensionMismatch):
        load_atoms(p)


def test_flow_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(epsilon=-1)
    with pytest.raises(ValueError):
        FlowConfig(tau_max=0)
    with pytest.raises(ValueError):
        FlowConfig(rel_tol=0)
    assert FlowConfig().replace(epsilon=0.5).epsilon == 0.5


def test_grid_validation_and_nodes():
    with pytest.raises(ValueError):
        GridSpec((0, 0), (0, 1), 3, 3)
    with pytest.raises(ValueError):
        GridSpec((0, 0), (1, 1), 1, 3)
    g = GridSpec.square(3.0, 401)
    assert g.xs[0] == -3.0 and g.xs[-1] == 3.0 and g.ys[200] == 0.0
    assert g.points().shape == (401, 401, 2)
    assert g.index_of((0.0, 0.0)) == (200, 200)


def test_label_field_validation():
    g = GridSpec((0, 0), (1, 1), 2, 2)
    with pytest.raises(ValueError):
        LabelField(g, np.array([[1, 5], [1, 1]]), "FM", 2)
    with pytest.raises(DimensionMismatch):
        LabelField(g, np.ones((3, 2), dtype=int), "FM", 2)
    f = LabelField(g, np.array([[1, UNRESOLVED], [2, 2]]), "FM", 2)
    assert f.resolved_fraction() == 0.75


def test_report_round_trip_is_exact(tmp_path):
    r = RunReport("x", {"grid": [1, 2]}, [CheckResult("c", True, 0.1 + 0.2, 1e-7, "d")], {"v": np.array([1 / 3])}, 1.5)
    r.save(tmp_path / "r.json")
    back = RunReport.load(tmp_path / "r.json")
    assert back.checks[0].measured == 0.1 + 0.2
    assert back.values["v"] == [1 / 3]
    assert back.passed and back.wall_time == 1.5
