"""File emitters: binary pixmaps, label/trajectory/weight CSVs."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import UNRESOLVED, GridSpec, LabelField, Trajectory
from .ot import LaguerreWeights

# label k uses PALETTE[(k - 1) % 16]; UNRESOLVED is white
PALETTE = np.array(
    [
        (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
        (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
        (188, 189, 34), (23, 190, 207), (0, 0, 128), (128, 0, 0),
        (0, 100, 0), (255, 215, 0), (75, 0, 130), (0, 0, 0),
    ],
    dtype=np.uint8,
)
WHITE = np.array([255, 255, 255], dtype=np.uint8)


def label_colors(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    rgb = PALETTE[(np.maximum(labels, 1) - 1) % len(PALETTE)]
    rgb[labels == UNRESOLVED] = WHITE
    return rgb


def emit_raster(field_: LabelField, path) -> None:
    """Binary P6 pixmap, one pixel per node.

    Pixel rows run over y from ``lo[1]`` upward and columns over x from
    ``lo[0]``, so the first row written is the lo-corner row.
    """
    rgb = label_colors(field_.labels.T)
    header = f"P6\n{field_.grid.nx} {field_.grid.ny}\n255\n".encode("ascii")
    Path(path).write_bytes(header + np.ascontiguousarray(rgb).tobytes())


def read_raster(path) -> np.ndarray:
    """RGB array of shape (rows, cols, 3) from a P6 file written by :func:`emit_raster`."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError(f"{path}: not a binary pixmap")
    width, height = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width, 3)


def write_labels_csv(field_: LabelField, path) -> None:
    g = field_.grid
    pts = g.points()
    with open(path, "w", newline="") as fh:
        fh.write(f"# producer={field_.producer} n={field_.n} lo={g.lo[0]!r},{g.lo[1]!r} "
                 f"hi={g.hi[0]!r},{g.hi[1]!r} nx={g.nx} ny={g.ny}\n")
        w = csv.writer(fh)
        w.writerow(["i", "j", "x", "y", "label"])
        for i in range(g.nx):
            for j in range(g.ny):
                w.writerow([i, j, repr(float(pts[i, j, 0])), repr(float(pts[i, j, 1])), int(field_.labels[i, j])])


def read_labels_csv(path) -> LabelField:
    with open(path, newline="") as fh:
        meta = dict(tok.split("=", 1) for tok in fh.readline().lstrip("# ").split())
        rows = list(csv.DictReader(fh))
    lo = tuple(float(v) for v in meta["lo"].split(","))
    hi = tuple(float(v) for v in meta["hi"].split(","))
    grid = GridSpec(lo, hi, int(meta["nx"]), int(meta["ny"]))
    labels = np.zeros((grid.nx, grid.ny), dtype=np.int64)
    for r in rows:
        labels[int(r["i"]), int(r["j"])] = int(r["label"])
    return LabelField(grid, labels, meta["producer"], int(meta["n"]))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columns t, x0..x{d-1}, captured.

    Integrator samples carry captured = 0. A closing row at t = 1 holds the
    terminal point with the capturing atom label (0 if none).
    """
    d = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{j}" for j in range(d)] + ["captured"])
        for t, x in zip(traj.times, traj.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [0])
        w.writerow(["1.0"] + [repr(float(v)) for v in traj.terminal] + [traj.captured_by or 0])


def write_weights_csv(weights: LaguerreWeights, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "psi_k", "mass_k"])
        for k, (p, m) in enumerate(zip(weights.psi, weights.masses), start=1):
            w.writerow([k, repr(float(p)), repr(float(m))])
