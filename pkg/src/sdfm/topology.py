"""Grid-level topology and geometry diagnostics of a LabelField.

Cells use 8-connectivity and their complements 4-connectivity. Every verdict
holds at grid resolution only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .core import UNRESOLVED, AtomSet, FlowConfig, LabelField

EIGHT = np.ones((3, 3), dtype=bool)
FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass
class ConvexityWitness:
    """Two label-k nodes whose midpoint node carries another definite label."""

    x1: tuple
    x2: tuple
    midpoint: tuple
    midpoint_label: int


@dataclass
class CellDiagnostics:
    label: int
    component_count: int
    hole_count: int
    adjacent_labels: set
    unbounded_directions: list = field(default_factory=list)
    convexity_witness: Optional[ConvexityWitness] = None
    star_shape_violations: int = 0


def connected_components(field_: LabelField, k: int) -> int:
    _, count = ndimage.label(field_.labels == k, structure=EIGHT)
    return int(count)


def hole_count(field_: LabelField, k: int) -> int:
    """Complement components (4-connected) that do not reach the grid border."""
    comp, count = ndimage.label(field_.labels != k, structure=FOUR)
    if count == 0:
        return 0
    border = np.unique(np.concatenate([comp[0], comp[-1], comp[:, 0], comp[:, -1]]))
    return int(count - np.count_nonzero(border))


def _shifted_pair(lab: np.ndarray, di: int, dj: int):
    """Views (lab[i, j], lab[i + di, j + dj]) over all valid index pairs."""
    nx, ny = lab.shape
    a = lab[max(0, -di) : nx - max(0, di), max(0, -dj) : ny - max(0, dj)]
    b = lab[max(0, di) : nx - max(0, -di), max(0, dj) : ny - max(0, -dj)]
    return a, b


def adjacency(field_: LabelField) -> set:
    """Unordered label pairs (k, l), k < l, found on 8-neighbor nodes.

    An UNRESOLVED node is transparent: all definite labels around it are
    paired with each other.
    """
    lab = field_.labels
    pairs = set()
    nx, ny = lab.shape
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
        a, b = _shifted_pair(lab, di, dj)
        mask = (a != b) & (a != UNRESOLVED) & (b != UNRESOLVED)
        if mask.any():
            lo = np.minimum(a[mask], b[mask])
            hi = np.maximum(a[mask], b[mask])
            pairs.update(zip(lo.tolist(), hi.tolist()))
    ui, uj = np.nonzero(lab == UNRESOLVED)
    for i, j in zip(ui, uj):
        hood = lab[max(0, i - 1) : i + 2, max(0, j - 1) : j + 2]
        labs = sorted(set(hood[hood != UNRESOLVED].tolist()))
        pairs.update(combinations(labs, 2))
    return {(int(p), int(q)) for p, q in pairs}


def boundary_mask(field_: LabelField) -> np.ndarray:
    """Definite nodes with an 8-neighbor of a different definite label."""
    lab = field_.labels
    out = np.zeros(lab.shape, dtype=bool)
    padded = np.pad(lab, 1, constant_values=UNRESOLVED)
    nx, ny = lab.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di : 1 + di + nx, 1 + dj : 1 + dj + ny]
            out |= (nb != lab) & (nb != UNRESOLVED)
    return out & (lab != UNRESOLVED)


def pair_boundary_nodes(field_: LabelField, k: int, l: int) -> np.ndarray:
    """Coordinates of k- or l-labelled nodes having an 8-neighbor of the other label."""
    lab = field_.labels
    padded = np.pad(lab, 1, constant_values=UNRESOLVED)
    nx, ny = lab.shape
    near_l = np.zeros(lab.shape, dtype=bool)
    near_k = np.zeros(lab.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            nb = padded[1 + di : 1 + di + nx, 1 + dj : 1 + dj + ny]
            near_l |= nb == l
            near_k |= nb == k
    mask = ((lab == k) & near_l) | ((lab == l) & near_k)
    pts = field_.grid.points()
    return pts[mask]


def line_fit_deviation(points: np.ndarray) -> float:
    """Largest distance of ``points`` to their total-least-squares line."""
    if len(points) < 3:
        return 0.0
    c = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    normal = vt[-1]
    return float(np.max(np.abs(c @ normal)))


def _lattice_subset(mask: np.ndarray, max_nodes: int) -> np.ndarray:
    """Indices of masked nodes on an even sub-lattice, thinned to at most max_nodes."""
    stride = 2
    while True:
        sub = np.zeros_like(mask)
        sub[::stride, ::stride] = True
        idx = np.argwhere(mask & sub)
        if len(idx) <= max_nodes:
            return idx
        stride *= 2


def convexity_witness(field_: LabelField, k: int, max_nodes: int = 600) -> Optional[ConvexityWitness]:
    """Search label-k node pairs whose lattice midpoint has another definite label.

    Nodes are taken from an even sub-lattice so that every midpoint is itself
    a grid node; a convex cell rasterized by exact membership can never yield
    a witness this way.
    """
    lab = field_.labels
    idx = _lattice_subset(lab == k, max_nodes)
    if len(idx) < 2:
        return None
    pts = field_.grid.points()
    for a in range(len(idx) - 1):
        p = idx[a]
        q = idx[a + 1 :]
        mid = (p + q) // 2
        ml = lab[mid[:, 0], mid[:, 1]]
        bad = np.nonzero((ml != k) & (ml != UNRESOLVED))[0]
        if len(bad):
            b = bad[0]
            m = mid[b]
            return ConvexityWitness(
                tuple(pts[tuple(p)].tolist()),
                tuple(pts[tuple(q[b])].tolist()),
                tuple(pts[tuple(m)].tolist()),
                int(ml[b]),
            )
    return None


def star_shape_check(field_: LabelField, atoms: AtomSet) -> dict:
    """Per-label count of grid cells crossed by segments [node, a_k] that lie
    wholly in other definite labels.

    Each segment is sampled at half the grid spacing; a sample counts as a
    violation when none of the four nodes around it carries label k and at
    least one carries a definite label. Samples outside the grid are skipped.
    """
    grid = field_.grid
    lab = field_.labels
    hx, hy = grid.spacing
    nx, ny = lab.shape
    out = {}
    for k in range(1, field_.n + 1):
        nodes = np.argwhere(lab == k)
        if len(nodes) == 0:
            out[k] = 0
            continue
        target = atoms.atoms[k - 1][:2]
        start = np.column_stack([grid.lo[0] + nodes[:, 0] * hx, grid.lo[1] + nodes[:, 1] * hy])
        span = np.abs(target - start)
        nsamp = int(np.ceil(np.max(np.maximum(span[:, 0] / hx, span[:, 1] / hy)) * 2)) + 1
        bad_cells = set()
        for s in np.linspace(0.0, 1.0, nsamp):
            p = start + s * (target - start)
            fi = (p[:, 0] - grid.lo[0]) / hx
            fj = (p[:, 1] - grid.lo[1]) / hy
            i0 = np.floor(fi).astype(int)
            j0 = np.floor(fj).astype(int)
            inside = (i0 >= 0) & (j0 >= 0) & (i0 < nx - 1) & (j0 < ny - 1)
            if not inside.any():
                continue
            i0, j0 = i0[inside], j0[inside]
            corners = np.stack([lab[i0, j0], lab[i0 + 1, j0], lab[i0, j0 + 1], lab[i0 + 1, j0 + 1]], axis=1)
            has_k = (corners == k).any(axis=1)
            definite = (corners != UNRESOLVED).any(axis=1)
            viol = ~has_k & definite
            if viol.any():
                bad_cells.update(zip(i0[viol].tolist(), j0[viol].tolist()))
        out[k] = len(bad_cells)
    return out


def unit_directions(count: int) -> np.ndarray:
    """``count`` equally spaced unit vectors starting at angle 0.

    Components below 1e-15 are set to zero so that axis directions are exact.
    """
    ang = 2.0 * math.pi * np.arange(count) / count
    u = np.column_stack([np.cos(ang), np.sin(ang)])
    u[np.abs(u) < 1e-15] = 0.0
    return u


def unbounded_probe(atoms: AtomSet, directions, radii: Sequence[float] = (8.0, 16.0, 32.0), producer: str = "FM",
                    cfg: FlowConfig = FlowConfig(), psi=None) -> dict:
    """Directions u whose far points R u (for every R in ``radii``) share one label.

    Returns {label: [u, ...]}. ``producer`` is "FM" (terminal assignment with
    ``cfg``) or "LAGUERRE" (needs ``psi``).
    """
    from .flow import assign_many
    from .ot import laguerre_assign

    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must increase")
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    pts = (radii[None, :, None] * dirs[:, None, :]).reshape(-1, atoms.dim)
    if producer == "FM":
        labels = assign_many(pts, atoms, cfg).labels
    elif producer == "LAGUERRE":
        if psi is None:
            raise ValueError("LAGUERRE probe needs psi")
        labels = np.asarray(laguerre_assign(pts, atoms, psi))
    else:
        raise ValueError(f"unknown producer {producer!r}")
    labels = labels.reshape(len(dirs), len(radii))
    out: dict = {}
    for u, row in zip(dirs, labels):
        if row[0] != UNRESOLVED and np.all(row == row[0]):
            out.setdefault(int(row[0]), []).append(tuple(u.tolist()))
    return out


def cell_diagnostics(field_: LabelField, atoms: Optional[AtomSet] = None, unbounded: Optional[dict] = None) -> list:
    adj = adjacency(field_)
    unbounded = unbounded or {}
    stars = star_shape_check(field_, atoms) if atoms is not None else {}
    out = []
    for k in range(1, field_.n + 1):
        neighbours = {q if p == k else p for p, q in adj if k in (p, q)}
        out.append(
            CellDiagnostics(
                k,
                connected_components(field_, k),
                hole_count(field_, k),
                neighbours,
                unbounded_directions=list(unbounded.get(k, [])),
                convexity_witness=convexity_witness(field_, k),
                star_shape_violations=stars.get(k, 0),
            )
        )
    return out
