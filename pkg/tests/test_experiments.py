import math

import numpy as np
import pytest

from sdfm import experiments as ex
from sdfm.core import FlowConfig, GridSpec, NonOrthogonal, make_atoms
from sdfm.flow import assign_many, tessellate


def test_identity_transform_is_exact(ten):
    probes = np.random.default_rng(0).standard_normal((20, 2))
    r = ex.check_equivariance(ten, FlowConfig(), 1.0, np.eye(2), None, probes)
    assert r.passed and r.measured == 0.0


def test_non_orthogonal_rejected(four):
    with pytest.raises(NonOrthogonal):
        ex.check_equivariance(four, FlowConfig(), 1.0, np.array([[1.0, 0.1], [0.0, 1.0]]), None, np.zeros((1, 2)))


def test_four_point_quarter_turn(four):
    probes = np.random.default_rng(1).standard_normal((30, 2))
    r = ex.check_equivariance(four, FlowConfig(), 1.0, ex.rotation(math.pi / 2), None, probes)
    assert r.passed and "label mismatches=0" in r.details


def test_hull_reduction_in_plane_probe_is_exact(four):
    lifted = make_atoms(np.column_stack([four.atoms, np.zeros(4)]))
    r = ex.check_hull_reduction(lifted, FlowConfig(), [[0.3, 0.2, 0.0]])
    assert r.measured < 1e-15


def test_hull_reduction_offset_plane(four):
    # hull not through the origin: the normal offset still shrinks by (1 - t)
    lifted = make_atoms(np.column_stack([four.atoms, np.full(4, 2.0)]))
    probes = np.random.default_rng(2).standard_normal((10, 3))
    assert ex.check_hull_reduction(lifted, FlowConfig(), probes).passed


def test_eps_sweep_single_atom():
    s = ex.eps_sweep(make_atoms([(0.2, 0.3)]), GridSpec.square(2.0, 21), FlowConfig(), (0.5, 0.1), probes=5)
    assert s.agreement == [1.0, 1.0]


def test_eps_sweep_probe_distances_shrink(ten):
    s = ex.eps_sweep(ten, GridSpec.square(3.0, 21), FlowConfig(), (0.4, 0.2, 0.1, 0.05))
    assert s.probe_distances.shape == (50, 4)
    assert s.monotone_fraction >= 0.9


def test_eps_sweep_rejects_increasing(ten):
    with pytest.raises(ValueError):
        ex.eps_sweep(ten, GridSpec.square(3.0, 5), FlowConfig(), (0.1, 0.2))


def test_interior_probes_are_interior(ten):
    pts = ex.interior_probes(ten, FlowConfig(), 10, seed=4)
    for d in (np.array([0.05, 0.0]), np.array([0.0, -0.05])):
        np.testing.assert_array_equal(assign_many(pts + d, ten).labels, assign_many(pts, ten).labels)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_ray_labels_far_out(k):
    assert ex.four_point_ray_label(k, 8.0) == 4
    assert ex.four_point_ray_label(k, 32.0) == 4


def test_ray_label_relabeling(four):
    # a point off the rays: rotate (-c, 0) + offset and compare with direct evaluation
    for k in (1, 2):
        assert ex.four_point_ray_label(k, 0.5) == assign_many(ex._direct_ray_point(k, 0.5)[None], four).labels[0]


def test_semidiscrete_pair(four):
    r = ex.four_point_monotonicity_pair()
    assert r.passed and r.measured == pytest.approx(-8.0, abs=1e-12)


def test_one_dimensional_terminal_map_is_monotone():
    a = make_atoms([(-1.0,), (1.0,)])
    x = np.linspace(-3, 3, 100)[:, None]
    pairs = np.stack([np.repeat(x, 100, 0), np.tile(x, (100, 1))], 1)
    r = ex.monotonicity_scan_semidiscrete(a, FlowConfig(), pairs)
    assert r.measured >= -1e-9 and not r.passed


def test_collinear_atoms_monotone():
    a = make_atoms([(-1.0, -0.5), (0.0, 0.0), (1.0, 0.5), (2.0, 1.0)])
    x = 2 * np.random.default_rng(1).standard_normal((30, 2))
    pairs = np.stack([np.repeat(x, 30, 0), np.tile(x, (30, 1))], 1)
    assert ex.monotonicity_scan_semidiscrete(a, FlowConfig(), pairs).measured >= -1e-9


def test_single_atom_monotone():
    a = make_atoms([(0.5, 0.5)])
    assert ex.monotonicity_field(a, GridSpec.square(1.0, 9)).min() == pytest.approx(0.0, abs=1e-12)
    r = ex.monotonicity_scan_gmm(a, 0.1, GridSpec.square(2.0, 11))
    assert r.measured >= 0 and not r.passed


def test_monotonicity_field_negative_for_four_point(four):
    assert ex.monotonicity_field(four, GridSpec.square(2.0, 41)).min() < 0


def test_gmm_scan_small_grid(four):
    # a coarse grid misses the narrow negative bands; it still converges everywhere
    grid = GridSpec.square(2.0, 21)
    scan = ex.gmm_eigen_scan(four, 0.1, grid)
    assert scan.converged.all()
    vals, steps, conv = ex.terminal_min_eigenvalues([[0.65, -1.25]], four, FlowConfig(epsilon=0.1, rel_tol=1e-11, abs_tol=1e-13))
    assert conv[0] and vals[0] < -40 and steps[0] < 1e-4


def test_eigenvalue_rotation_symmetry(four):
    pts = np.random.default_rng(3).uniform(-2, 2, (10, 2))
    assert ex.rotational_symmetry_gap(four, 0.1, pts).passed


def test_jacobian_check(four):
    assert all(c.passed for c in ex.jacobian_check(four, samples=20))


def test_single_atom_closed_form_check():
    assert ex.single_atom_closed_form(samples=20).passed
    assert ex.single_atom_closed_form(samples=5, dim=3).passed


def test_capture_soundness_small(four):
    assert ex.capture_soundness(four, count=20).passed


def test_scaling_small(four):
    assert ex.scaling_check(four, GridSpec.square(2.0, 40)).passed


def test_topology_check_reports_grid(four):
    r = ex.topology_check(tessellate(four, GridSpec.square(1.5, 100)))
    assert r.passed and "100x100" in r.details


def test_checks_reproducible(ten):
    a = ex.capture_soundness(ten, count=10, seed=3)
    b = ex.capture_soundness(ten, count=10, seed=3)
    assert a == b
    c, _, _ = ex.centers_check(ten)
    d, _, _ = ex.centers_check(ten)
    assert c == d
