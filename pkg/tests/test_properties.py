import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sdfm.core import CheckResult, GridSpec, LabelField, RunReport, make_atoms
from sdfm.io import read_labels_csv, write_labels_csv
from sdfm.ot import laguerre_assign
from sdfm.topology import adjacency, connected_components, hole_count
from sdfm.velocity import bounded_drift, softmax_weights, velocity

finite = st.floats(-5, 5, allow_nan=False)
coords = arrays(np.float64, st.tuples(st.integers(1, 6), st.just(2)), elements=finite)
PROFILE = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])


def distinct(points):
    d = np.linalg.norm(points[:, None] - points[None], axis=-1)
    d[np.diag_indices(len(points))] = np.inf
    return len(points) == 1 or d.min() > 1e-3


@PROFILE
@given(coords, st.floats(0, 1 - 1e-12), st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(0, 2))
def test_weights_form_distribution(pts, t, x0, x1, eps):
    if not distinct(pts):
        return
    w = softmax_weights(t, np.array([x0, x1]), make_atoms(pts), eps)
    assert np.all(w >= 0) and abs(w.sum() - 1) <= 1e-12


@PROFILE
@given(coords)
def test_separation_radius_below_half_gap(pts):
    if not distinct(pts):
        return
    a = make_atoms(pts)
    assert a.sep_radius < a.min_gap / 2
    b = make_atoms(pts[::-1])
    assert a.min_gap == b.min_gap


@PROFILE
@given(coords, st.floats(0, 40), st.floats(-5, 5), st.floats(-5, 5))
def test_drift_norm_bound(pts, tau, x0, x1):
    if not distinct(pts):
        return
    a = make_atoms(pts)
    x = np.array([x0, x1])
    assert np.linalg.norm(bounded_drift(tau, x, a)) <= np.linalg.norm(a.atoms - x, axis=1).max() * (1 + 1e-12) + 1e-300


@PROFILE
@given(coords, st.floats(0, 2 * math.pi), st.floats(0, 0.95), st.floats(-3, 3), st.floats(-3, 3))
def test_velocity_rotation_equivariance(pts, ang, t, x0, x1):
    if not distinct(pts):
        return
    a = make_atoms(pts)
    rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    x = np.array([x0, x1])
    lhs = velocity(t, rot @ x, a.transformed(1.0, rot))
    rhs = rot @ velocity(t, x, a)
    assert np.allclose(lhs, rhs, rtol=1e-7, atol=1e-7 / (1 - t))


@PROFILE
@given(coords, st.floats(-3, 3), arrays(np.float64, 6, elements=st.floats(0, 1)))
def test_laguerre_shift_invariance(pts, shift, psi):
    if not distinct(pts):
        return
    a = make_atoms(pts)
    psi = psi[: a.n]
    grid = GridSpec.square(3.0, 12).points().reshape(-1, 2)
    np.testing.assert_array_equal(laguerre_assign(grid, a, psi), laguerre_assign(grid, a, psi + shift))


label_arrays = arrays(np.int64, st.tuples(st.integers(2, 12), st.integers(2, 12)), elements=st.integers(0, 4))


def as_field(lab):
    return LabelField(GridSpec((0, 0), (1, 1), *lab.shape), lab, "FM", 4)


@PROFILE
@given(label_arrays)
def test_adjacency_well_formed(lab):
    adj = adjacency(as_field(lab))
    assert all(1 <= p < q <= 4 for p, q in adj)


@PROFILE
@given(label_arrays)
def test_topology_counts_nonnegative(lab):
    f = as_field(lab)
    for k in range(1, 5):
        c = connected_components(f, k)
        h = hole_count(f, k)
        assert c >= 0 and h >= 0
        if c == 0:
            assert h == 0


@PROFILE
@given(label_arrays)
def test_labels_csv_lossless(tmp_path_factory, lab):
    path = tmp_path_factory.mktemp("csv") / "l.csv"
    f = as_field(lab)
    write_labels_csv(f, path)
    g = read_labels_csv(path)
    np.testing.assert_array_equal(g.labels, f.labels)
    assert g.grid == f.grid


@PROFILE
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
def test_report_values_bit_exact(values):
    r = RunReport("p", {}, [CheckResult("c", True, values[0], 0.0)], {"v": values})
    back = RunReport.from_json(r.to_json())
    assert back.values["v"] == values and back.checks[0].measured == values[0]
