"""Verification suites that turn structural properties of the flow-matching
cells into measurable checks.

Each suite returns :class:`CheckResult` objects (or small dataclasses holding
them) with deterministic measured values for a fixed configuration and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .core import (
    UNRESOLVED,
    AtomSet,
    CheckResult,
    FlowConfig,
    GridSpec,
    LabelField,
    NonOrthogonal,
    four_point_example,
    make_atoms,
)
from .flow import (
    assign_many,
    center_curve,
    euler_tessellate,
    flow_map,
    tessellate,
    terminal_map,
)
from .ot import solve_weights, tessellate_laguerre
from .topology import (
    adjacency,
    boundary_mask,
    connected_components,
    convexity_witness,
    hole_count,
    line_fit_deviation,
    pair_boundary_nodes,
    unbounded_probe,
    unit_directions,
)
from .velocity import jacobian_norm_bound, velocity, velocity_jacobian

# window on which the four-point arms are resolved at a few hundred nodes
COUNTEREXAMPLE_GRID = GridSpec.square(1.5, 400)
OUTER_PAIRS = {(1, 2), (1, 3), (2, 3)}


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------- closed forms


def single_atom_closed_form(cfg: FlowConfig = FlowConfig(), samples: int = 100, seed: int = 0,
                            dim: int = 2) -> CheckResult:
    """With one atom a the path is (1 - t) x0 + t a; compare at random (x0, t)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        a = rng.standard_normal(dim)
        x0 = 2.0 * rng.standard_normal(dim)
        t = float(rng.uniform(0.0, 1.0))
        atoms = make_atoms(a[None, :])
        got = flow_map(x0, t, atoms, cfg)
        worst = max(worst, float(np.linalg.norm(got - ((1 - t) * x0 + t * a))))
    return CheckResult("single-atom closed form", worst < 1e-7, worst, 1e-7, f"{samples} samples")


def capture_soundness(atoms: AtomSet, cfg: FlowConfig = FlowConfig(), count: int = 200, seed: int = 0) -> CheckResult:
    """Integrate past each declared capture with capture disabled and confirm
    the path stays inside the separation ball of the capturing atom up to
    ``tau_max``."""
    rng = np.random.default_rng(seed)
    starts = rng.standard_normal((count, atoms.dim))
    d = atoms.dim
    rec = np.empty((cfg.max_steps + 2, d + 1))
    xout = np.empty(d)
    tail = np.empty(d)
    captured = escaped = 0
    worst = 0.0
    for x0 in starts:
        status, s_cap, k, _, _ = K.dopri(x0, 0.0, cfg.tau_max, atoms.atoms, 0.0, K.MODE_TAU, cfg.rel_tol, cfg.abs_tol,
                                         atoms.sep_radius, cfg.capture_alpha, True, cfg.max_steps,
                                         rec[:0], xout)
        if status != K.CAPTURED:
            continue
        captured += 1
        if s_cap >= cfg.tau_max:
            continue
        st, _, _, _, nrec = K.dopri(xout.copy(), s_cap, cfg.tau_max, atoms.atoms, 0.0, K.MODE_TAU, cfg.rel_tol,
                                    cfg.abs_tol, atoms.sep_radius, cfg.capture_alpha, False, cfg.max_steps, rec, tail)
        dist = np.linalg.norm(rec[:nrec, 1:] - atoms.atoms[k], axis=1).max()
        worst = max(worst, float(dist / atoms.sep_radius))
        if st != K.OK or dist >= atoms.sep_radius:
            escaped += 1
    passed = captured == count and escaped == 0
    return CheckResult("capture soundness", passed, captured - escaped, count,
                       f"captured={captured} escaped={escaped} max_dist/sep_radius={worst:.3g}")


# ---------------------------------------------------------------- equivariance


def check_equivariance(atoms: AtomSet, cfg: FlowConfig, scale: float, orth: np.ndarray, shift,
                       probes) -> CheckResult:
    """Terminal maps of the transformed atoms c A a_k + b against c A gamma(x) + b at A x."""
    orth = np.asarray(orth, dtype=float)
    if orth.shape != (atoms.dim, atoms.dim) or np.abs(orth.T @ orth - np.eye(atoms.dim)).max() > 1e-12:
        raise NonOrthogonal("transform matrix is not orthogonal within 1e-12")
    shift = np.zeros(atoms.dim) if shift is None else np.asarray(shift, dtype=float)
    probes = np.asarray(probes, dtype=float)
    moved = atoms.transformed(scale, orth, shift)
    base = terminal_map(probes, atoms, cfg)
    other = terminal_map(probes @ orth.T, moved, cfg)
    err = float(np.max(np.linalg.norm(other - (scale * base @ orth.T + shift), axis=1)))
    lab0 = assign_many(probes, atoms, cfg).labels
    lab1 = assign_many(probes @ orth.T, moved, cfg).labels
    return CheckResult("terminal-map equivariance", err < 1e-6, err, 1e-6,
                       f"{len(probes)} probes; label mismatches={int(np.sum(lab0 != lab1))}")


def scaling_check(atoms: AtomSet, grid: GridSpec, scales: Sequence[float] = (0.1, 0.5, 1.5),
                  cfg: FlowConfig = FlowConfig()) -> CheckResult:
    """Tessellations of c * atoms must coincide node-wise with the unscaled one."""
    base = tessellate(atoms, grid, cfg)
    diffs = {}
    for c in scales:
        other = tessellate(atoms.transformed(float(c)), grid, cfg)
        diffs[float(c)] = int(np.sum(other.labels != base.labels))
    worst = max(diffs.values())
    return CheckResult("scaling invariance of cells", worst == 0, diffs, 0,
                       f"grid {grid.nx}x{grid.ny}")


def check_hull_reduction(atoms: AtomSet, cfg: FlowConfig, probes,
                         times: Sequence[float] = (0.1, 0.3, 0.5, 0.7, 0.9)) -> CheckResult:
    """Split x into its affine-hull part and normal offset; the offset must
    shrink by exactly (1 - t) while the hull part follows the planar flow."""
    a = atoms.atoms
    diffs = a[1:] - a[0]
    _, sv, vt = np.linalg.svd(diffs, full_matrices=False)
    basis = vt[sv > 1e-10 * max(1.0, sv.max(initial=0.0))]
    proj = basis.T @ basis
    normal = np.eye(atoms.dim) - proj
    offset = normal @ a[0]
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    perp = probes @ normal.T - offset
    par = probes - perp
    worst = 0.0
    for t in times:
        full = flow_map(probes, float(t), atoms, cfg)
        flat = flow_map(par, float(t), atoms, cfg)
        worst = max(worst, float(np.max(np.linalg.norm(full - flat - (1 - t) * perp, axis=1))))
    return CheckResult("affine-hull reduction", worst < 1e-6, worst, 1e-6,
                       f"{len(probes)} probes x {len(times)} times; hull dimension {len(basis)}")


# ---------------------------------------------------------------- smoothing


@dataclass
class EpsSweep:
    eps: list
    agreement: list
    probe_distances: np.ndarray
    monotone_fraction: float
    fields: dict = field(default_factory=dict, repr=False)

    @property
    def nondecreasing(self) -> bool:
        return all(b >= a for a, b in zip(self.agreement, self.agreement[1:]))


def interior_probes(atoms: AtomSet, cfg: FlowConfig, count: int = 50, seed: int = 0, margin: float = 0.05) -> np.ndarray:
    """Gaussian start points whose label is shared by the four points at distance ``margin``."""
    rng = np.random.default_rng(seed)
    offsets = margin * np.vstack([np.eye(atoms.dim), -np.eye(atoms.dim)])
    chosen = []
    while len(chosen) < count:
        cand = rng.standard_normal((4 * count, atoms.dim))
        pts = np.concatenate([cand[:, None, :], cand[:, None, :] + offsets[None]], axis=1)
        labels = assign_many(pts.reshape(-1, atoms.dim), atoms, cfg).labels.reshape(len(cand), -1)
        ok = (labels[:, 0] != UNRESOLVED) & np.all(labels == labels[:, :1], axis=1)
        chosen.extend(cand[ok])
    return np.array(chosen[:count])


def eps_sweep(atoms: AtomSet, grid: GridSpec, cfg: FlowConfig, eps_list: Sequence[float],
              probes: int = 50, seed: int = 0, keep_fields: bool = False) -> EpsSweep:
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must decrease and stay positive")
    exact_cfg = cfg.replace(epsilon=0.0)
    base = tessellate(atoms, grid, exact_cfg) if atoms.dim == 2 else None
    pts = interior_probes(atoms, exact_cfg, probes, seed)
    target = terminal_map(pts, atoms, exact_cfg)
    agreement, dists, fields = [], [], {}
    for e in eps_list:
        ecfg = cfg.replace(epsilon=e)
        if base is not None:
            fe = tessellate(atoms, grid, ecfg)
            agreement.append(base.agreement(fe))
            if keep_fields:
                fields[e] = fe
        dists.append(np.linalg.norm(terminal_map(pts, atoms, ecfg) - target, axis=1))
    dists = np.array(dists).T
    mono = float(np.mean(np.all(np.diff(dists, axis=1) <= 0, axis=1))) if len(eps_list) > 1 else 1.0
    if keep_fields and base is not None:
        fields[0.0] = base
    return EpsSweep(eps_list, agreement, dists, mono, fields)


# ---------------------------------------------------------------- four-point rays


def four_point_ray_label(k: int, c: float, cfg: FlowConfig = FlowConfig()) -> int:
    """Label of -c a_k for the four-point configuration.

    The configuration is invariant under rotation by 120 degrees, which
    permutes the outer atoms and fixes the origin. Rotating -c a_k onto the
    negative x-axis turns it into the exactly representable point (-c, 0); the
    label found there is mapped back through the induced permutation. Direct
    evaluation at the rounded rotated point is unreliable once the cell's
    arm around the ray is thinner than the rounding error.
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be an outer atom (1, 2 or 3)")
    m = int(assign_many(np.array([[-float(c), 0.0]]), four_point_example(), cfg).labels[0])
    if m in (UNRESOLVED, 4):
        return m
    return (m + k - 1) % 3 + 1


def _direct_ray_point(k: int, c: float) -> np.ndarray:
    ang = 2.0 * math.pi * k / 3.0
    return np.array([-c * math.cos(ang), -c * math.sin(ang)])


def counterexample_suite(cfg: FlowConfig = FlowConfig(), grid: GridSpec = COUNTEREXAMPLE_GRID,
                         ray_scales: Sequence[float] = (0.5, 2.0, 8.0, 32.0),
                         half_line: Sequence[float] = (4.0, 8.0, 16.0),
                         radii: Sequence[float] = (8.0, 16.0, 32.0),
                         laguerre_seed: int = 0, fields: Optional[dict] = None) -> list:
    """Seven checks on the four-point configuration. ``fields`` receives the
    FM and LAGUERRE rasters and the Laguerre weights when given."""
    atoms = four_point_example()
    checks = []

    ray = {(k, c): four_point_ray_label(k, c, cfg) for k in (1, 2, 3) for c in ray_scales}
    direct = assign_many(np.array([_direct_ray_point(k, c) for k, c in ray]), atoms, cfg).labels
    bad = [f"k={k},c={c}->{v}" for (k, c), v in ray.items() if v != 4]
    checks.append(CheckResult("rays -c a_k lie in cell 4", not bad, {f"{k},{c}": v for (k, c), v in ray.items()}, 4,
                              f"failures={bad}; rounded-point labels={direct.tolist()}"))

    hl = assign_many(np.array([[c, 0.0] for c in half_line]), atoms, cfg).labels
    scan = np.arange(0.25, 16.0 + 1e-9, 0.25)
    scan_labels = assign_many(np.column_stack([scan, np.zeros_like(scan)]), atoms, cfg).labels
    c0 = float("nan")
    for i in range(len(scan)):
        if np.all(scan_labels[i:] == 3):
            c0 = float(scan[i])
            break
    checks.append(CheckResult("half-line (c, 0) lies in cell 3", bool(np.all(hl == 3)),
                              dict(zip(map(float, half_line), hl.tolist())), 3,
                              f"empirical c0 on a 0.25 scan up to 16: {c0}"))

    fm = tessellate(atoms, grid, cfg)
    weights = solve_weights(atoms, seed=laguerre_seed)
    lag = tessellate_laguerre(atoms, weights.psi, grid)
    adj_fm = adjacency(fm)
    adj_lag = adjacency(lag)
    checks.append(CheckResult("FM adjacency lacks outer pairs", not (adj_fm & OUTER_PAIRS), sorted(adj_fm),
                              sorted(OUTER_PAIRS), "excluded"))
    checks.append(CheckResult("Laguerre adjacency has outer pairs", OUTER_PAIRS <= adj_lag, sorted(adj_lag),
                              sorted(OUTER_PAIRS), "required"))

    fm_dirs = unbounded_probe(atoms, [(-1.0, 0.0)], radii, "FM", cfg)
    lag_dirs = unbounded_probe(atoms, unit_directions(64), radii, "LAGUERRE", psi=weights.psi)
    ok = (-1.0, 0.0) in fm_dirs.get(4, []) and 4 not in lag_dirs
    checks.append(CheckResult("cell 4 unbounded, Laguerre cell 4 bounded", ok,
                              {"fm_label4": fm_dirs.get(4, []), "laguerre_label4": lag_dirs.get(4, [])}, None,
                              f"radii={list(radii)}; 64 Laguerre directions"))

    wit = convexity_witness(fm, 4)
    checks.append(CheckResult("cell 4 non-convex", wit is not None, None if wit is None else vars(wit), None,
                              f"grid {grid.nx}x{grid.ny}"))

    pts = pair_boundary_nodes(fm, 3, 4)
    dev_cells = line_fit_deviation(pts) / max(grid.spacing)
    checks.append(CheckResult("cell 3/4 boundary not a line", dev_cells > 5.0, dev_cells, 5.0,
                              f"{len(pts)} boundary nodes; deviation in grid cells"))
    if fields is not None:
        fields.update(fm=fm, laguerre=lag, weights=weights)
    return checks


# ---------------------------------------------------------------- monotonicity


def monotonicity_scan_semidiscrete(atoms: AtomSet, cfg: FlowConfig, probe_pairs) -> CheckResult:
    """min over pairs of <gamma(x2) - gamma(x1), x2 - x1>; passes when negative."""
    pairs = np.asarray(probe_pairs, dtype=float)
    g1 = terminal_map(pairs[:, 0], atoms, cfg)
    g2 = terminal_map(pairs[:, 1], atoms, cfg)
    prods = np.sum((g2 - g1) * (pairs[:, 1] - pairs[:, 0]), axis=1)
    m = float(prods.min())
    return CheckResult("terminal map not monotone", m < 0, m, 0.0, f"{len(pairs)} pairs")


def four_point_monotonicity_pair(cfg: FlowConfig = FlowConfig(), near: float = 2.0, far: float = 20.0) -> CheckResult:
    """Inner product for x1 = (near, 0) and x2 = (far / 2)(1, sqrt 3).

    x2 lies on the ray -far * a_2, so its terminal point comes from the
    rotated-frame evaluation of :func:`four_point_ray_label`.
    """
    atoms = four_point_example()
    x1 = np.array([near, 0.0])
    x2 = 0.5 * far * np.array([1.0, math.sqrt(3.0)])
    g1 = terminal_map(x1[None], atoms, cfg)[0]
    lab2 = four_point_ray_label(2, far, cfg)
    if lab2 == UNRESOLVED:
        return CheckResult("four-point monotonicity pair", False, float("nan"), 0.0, "x2 unresolved")
    g2 = atoms.atoms[lab2 - 1]
    prod = float(np.dot(g2 - g1, x2 - x1))
    return CheckResult("four-point monotonicity pair", prod < 0, prod, 0.0,
                       f"x1 -> atom {assign_many(x1[None], atoms, cfg).labels[0]}, x2 -> atom {lab2}")


def monotonicity_field(atoms: AtomSet, grid: GridSpec, cfg: FlowConfig = FlowConfig(), chunk: int = 512) -> np.ndarray:
    """For every node x, min over nodes y of <gamma(y) - gamma(x), y - x>."""
    pts = grid.points().reshape(-1, 2)
    g = terminal_map(pts, atoms, cfg)
    out = np.empty(len(pts))
    gy_y = np.sum(g * pts, axis=1)
    for lo in range(0, len(pts), chunk):
        p, q = pts[lo:lo + chunk], g[lo:lo + chunk]
        # <g_y - g_x, y - x> = g_y.y - g_y.x - g_x.y + g_x.x
        val = gy_y[None, :] - p @ g.T - q @ pts.T + np.sum(q * p, axis=1)[:, None]
        out[lo:lo + chunk] = val.min(axis=1)
    return out.reshape(grid.nx, grid.ny)


@dataclass
class EigenScan:
    grid: GridSpec
    min_eig: np.ndarray
    steps: np.ndarray
    converged: np.ndarray

    @property
    def argmin(self) -> tuple:
        vals = np.where(self.converged, self.min_eig, np.inf)
        return tuple(int(v) for v in np.unravel_index(np.argmin(vals), vals.shape))


def _fd_jacobian(pts: np.ndarray, atoms: AtomSet, cfg: FlowConfig, h: np.ndarray) -> np.ndarray:
    d = atoms.dim
    jac = np.empty((len(pts), d, d))
    for j in range(d):
        e = np.zeros((len(pts), d))
        e[:, j] = h
        jac[:, :, j] = (terminal_map(pts + e, atoms, cfg) - terminal_map(pts - e, atoms, cfg)) / (2 * h[:, None])
    return jac


def terminal_min_eigenvalues(points, atoms: AtomSet, cfg: FlowConfig, fd_step: float = 1e-4,
                             rel_agree: float = 1e-3, min_step: float = 1e-7):
    """Smallest eigenvalue of J + J^T for the terminal map by central differences.

    Each point starts at ``fd_step``; the estimate is accepted once the
    Jacobians at h and 2h agree to ``rel_agree`` relative to max(1, |J|).
    Otherwise h is halved, down to ``min_step``. Returns (values, steps, converged).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = len(pts)
    h = np.full(m, float(fd_step))
    coarse = _fd_jacobian(pts, atoms, cfg, 2 * h)
    fine = _fd_jacobian(pts, atoms, cfg, h)
    conv = np.zeros(m, dtype=bool)
    jac = fine.copy()
    todo = np.arange(m)
    while True:
        gap = np.abs(fine - coarse).max(axis=(1, 2))
        scale = np.maximum(1.0, np.abs(fine).max(axis=(1, 2)))
        ok = gap <= rel_agree * scale
        jac[todo] = fine
        conv[todo[ok]] = True
        keep = ~ok & (h[todo] / 2 >= min_step)
        todo = todo[keep]
        if len(todo) == 0:
            break
        coarse = fine[keep]
        h[todo] /= 2
        fine = _fd_jacobian(pts[todo], atoms, cfg, h[todo])
    sym = jac + np.transpose(jac, (0, 2, 1))
    return np.linalg.eigvalsh(sym)[:, 0], h, conv


def gmm_eigen_scan(atoms: AtomSet, epsilon: float, grid: GridSpec, fd_step: float = 1e-4,
                   cfg: FlowConfig = FlowConfig(rel_tol=1e-11, abs_tol=1e-13)) -> EigenScan:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    ecfg = cfg.replace(epsilon=float(epsilon))
    vals, steps, conv = terminal_min_eigenvalues(grid.points().reshape(-1, 2), atoms, ecfg, fd_step)
    shape = (grid.nx, grid.ny)
    return EigenScan(grid, vals.reshape(shape), steps.reshape(shape), conv.reshape(shape))


def monotonicity_scan_gmm(atoms: AtomSet, epsilon: float, grid: GridSpec, fd_step: float = 1e-4,
                          scan: Optional[EigenScan] = None) -> CheckResult:
    """Passes when the symmetrized terminal Jacobian has a negative eigenvalue somewhere."""
    scan = scan or gmm_eigen_scan(atoms, epsilon, grid, fd_step)
    i, j = scan.argmin
    m = float(scan.min_eig[i, j])
    x = grid.points()[i, j]
    return CheckResult("mixture terminal map not monotone", m < 0, m, 0.0,
                       f"argmin at ({x[0]:.4g}, {x[1]:.4g}); unconverged nodes={int((~scan.converged).sum())}")


def minimizer_near_boundary(scan: EigenScan, labels: LabelField, cells: int = 3) -> CheckResult:
    """Chebyshev node distance from the eigenvalue minimizer to the nearest boundary node."""
    nodes = np.argwhere(boundary_mask(labels))
    if len(nodes) == 0:
        return CheckResult("eigenvalue minimizer near a boundary", False, float("inf"), cells, "no boundary nodes")
    dist = int(np.abs(nodes - np.array(scan.argmin)).max(axis=1).min())
    return CheckResult("eigenvalue minimizer near a boundary", dist <= cells, dist, cells, "grid cells")


def rotational_symmetry_gap(atoms: AtomSet, epsilon: float, points, angle: float = 2 * math.pi / 3,
                            fd_step: float = 1e-4, cfg: FlowConfig = FlowConfig(rel_tol=1e-11, abs_tol=1e-13),
                            tol: float = 1e-3) -> CheckResult:
    """Relative change of the smallest symmetrized-Jacobian eigenvalue under a rotation of the points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ecfg = cfg.replace(epsilon=float(epsilon))
    v0, _, c0 = terminal_min_eigenvalues(pts, atoms, ecfg, fd_step)
    v1, _, c1 = terminal_min_eigenvalues(pts @ rotation(angle).T, atoms, ecfg, fd_step)
    gap = float(np.max(np.abs(v1 - v0) / np.maximum(1.0, np.abs(v0))))
    return CheckResult("eigenvalue field rotation symmetry", gap <= tol, gap, tol,
                       f"{len(pts)} points; unconverged={int((~c0).sum() + (~c1).sum())}")


# ---------------------------------------------------------------- velocity / centers / oracle / topology


def jacobian_check(atoms: AtomSet, samples: int = 100, seed: int = 0, t_max: float = 0.9,
                   fd_step: float = 1e-6) -> list:
    """Analytic Jacobian against central differences, and the norm bound."""
    rng = np.random.default_rng(seed)
    worst_rel = 0.0
    worst_ratio = 0.0
    for _ in range(samples):
        t = float(rng.uniform(0.0, t_max))
        x = rng.standard_normal(atoms.dim)
        jac = velocity_jacobian(t, x, atoms)
        fd = np.empty_like(jac)
        for j in range(atoms.dim):
            e = np.zeros(atoms.dim)
            e[j] = fd_step
            fd[:, j] = (velocity(t, x + e, atoms) - velocity(t, x - e, atoms)) / (2 * fd_step)
        worst_rel = max(worst_rel, float(np.linalg.norm(jac - fd) / np.linalg.norm(jac)))
        worst_ratio = max(worst_ratio, float(np.linalg.norm(jac, 2) / jacobian_norm_bound(t, x, atoms)))
    return [
        CheckResult("Jacobian vs finite differences", worst_rel < 1e-5, worst_rel, 1e-5, f"{samples} samples"),
        # the bound is tight as t -> 0, so allow rounding in the ratio
        CheckResult("Jacobian norm bound", worst_ratio <= 1.0 + 1e-12, worst_ratio, 1.0,
                    "max ||J||_2 / bound, rounding allowance 1e-12"),
    ]


def centers_check(atoms: AtomSet, cfg: FlowConfig = FlowConfig(), levels: int = 20):
    """Cauchy check on the dyadic center-curve samples of every atom.

    Returns (check, curves, limit_labels); limit labels are informational.
    """
    from .flow import dyadic_schedule

    curves = [center_curve(k, atoms, cfg, dyadic_schedule(levels)) for k in range(1, atoms.n + 1)]
    bad = [c.k for c in curves if not c.cauchy]
    limits = assign_many(np.array([c.limit for c in curves]), atoms, cfg).labels
    check = CheckResult("center curves settle", not bad, bad, [],
                        f"limit labels={limits.tolist()} (expected 1..{atoms.n})")
    return check, curves, limits


def oracle_equivalence(atoms: AtomSet, grid: GridSpec, cfg: FlowConfig = FlowConfig(), dtau: float = 1e-4,
                       threshold: float = 0.99) -> CheckResult:
    fm = tessellate(atoms, grid, cfg)
    ref = euler_tessellate(atoms, grid, dtau, cfg.tau_max)
    agree = fm.agreement(ref)
    return CheckResult("agreement with Euler oracle", agree >= threshold, agree, threshold,
                       f"grid {grid.nx}x{grid.ny}, dtau={dtau}")


def topology_check(labels: LabelField, name: str = "cells") -> CheckResult:
    """One component and no holes for every label, at grid resolution."""
    comps = [connected_components(labels, k) for k in range(1, labels.n + 1)]
    holes = [hole_count(labels, k) for k in range(1, labels.n + 1)]
    ok = all(c == 1 for c in comps) and all(h == 0 for h in holes)
    g = labels.grid
    return CheckResult(f"{name} topology", ok, {"components": comps, "holes": holes}, {"components": 1, "holes": 0},
                       f"at grid resolution {g.nx}x{g.ny} on [{g.lo[0]}, {g.hi[0]}]x[{g.lo[1]}, {g.hi[1]}]")
