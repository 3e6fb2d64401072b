"""Domain types shared by the flow, transport and diagnostics modules."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

UNRESOLVED = 0
DUPLICATE_TOL = 1e-12


class SDFMError(Exception):
    """Base class for all package errors."""


class DuplicateAtoms(SDFMError):
    pass


class DimensionMismatch(SDFMError):
    pass


class InvalidTime(SDFMError):
    pass


class StepLimitExceeded(SDFMError):
    pass


class NonFiniteState(SDFMError):
    pass


class LengthMismatch(SDFMError):
    pass


class NonOrthogonal(SDFMError):
    pass


class NotConverged(SDFMError):
    pass


@dataclass(frozen=True)
class AtomSet:
    """Support points of the uniform discrete target.

    ``atoms`` has shape ``(n, d)``. ``min_gap`` is the smallest pairwise
    distance (``inf`` for a single atom) and ``sep_radius`` the capture
    radius, strictly below half of ``min_gap``.
    """

    atoms: np.ndarray
    min_gap: float
    sep_radius: float

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def radius(self) -> float:
        """max_k ||a_k||, the atom-radius bound about the origin."""
        return float(np.max(np.linalg.norm(self.atoms, axis=1)))

    def transformed(self, scale: float = 1.0, rotation=None, shift=None) -> "AtomSet":
        """Atoms ``scale * rotation @ a_k + shift``."""
        a = self.atoms
        if rotation is not None:
            a = a @ np.asarray(rotation, dtype=float).T
        a = scale * a
        if shift is not None:
            a = a + np.asarray(shift, dtype=float)
        return make_atoms(a)


def make_atoms(points, sep_radius: Optional[float] = None) -> AtomSet:
    """Validate target support points and precompute separation data.

    Raises :class:`DuplicateAtoms` if two points are closer than 1e-12 and
    :class:`DimensionMismatch` on ragged input.
    """
    try:
        arr = np.array(points, dtype=float)
    except ValueError as exc:
        raise DimensionMismatch(str(exc)) from exc
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"expected an (n, d) array of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("atoms must be finite")
    n = arr.shape[0]
    if n == 1:
        gap = math.inf
    else:
        diff = arr[:, None, :] - arr[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        dist[np.diag_indices(n)] = np.inf
        gap = float(dist.min())
        if gap < DUPLICATE_TOL:
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            raise DuplicateAtoms(f"atoms {i + 1} and {j + 1} coincide")
    if sep_radius is None:
        # single atom: any radius works, capture only needs the alpha test
        sep_radius = gap / 4 if math.isfinite(gap) else 1.0
    elif not (0 < sep_radius < gap / 2):
        raise ValueError("sep_radius must lie in (0, min_gap / 2)")
    arr.setflags(write=False)
    return AtomSet(arr, gap, float(sep_radius))


def four_point_example() -> AtomSet:
    """Three unit cube roots of unity plus the origin.

    a_k = (cos(2k pi/3), sin(2k pi/3)) for k = 1, 2, 3 and a_4 = 0. The
    coordinates are written so that the mirror symmetry y -> -y holds
    exactly in floating point.
    """
    s = math.sqrt(3.0) / 2.0
    return make_atoms([(-0.5, s), (-0.5, -s), (1.0, 0.0), (0.0, 0.0)])


def random_atoms(seed: int, n: int, dim: int = 2) -> AtomSet:
    """Standard-normal atoms drawn from ``numpy.random.default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    return make_atoms(rng.standard_normal((n, dim)))


# fixed ten-atom configuration used by the figure-style commands and checks
TEN_ATOM_SEED = 14


def ten_atom_example() -> AtomSet:
    return random_atoms(TEN_ATOM_SEED, 10, 2)


def load_atoms(path) -> AtomSet:
    """Read ``d n`` on the first line followed by ``n`` rows of ``d`` numbers."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows:
        raise ValueError(f"{path}: empty atom file")
    d, n = (int(v) for v in rows[0])
    body = rows[1:]
    if len(body) != n:
        raise DimensionMismatch(f"{path}: header announces {n} atoms, found {len(body)}")
    if any(len(r) != d for r in body):
        raise DimensionMismatch(f"{path}: every row must have {d} coordinates")
    return make_atoms([[float(v) for v in r] for r in body])


def save_atoms(atoms: AtomSet, path) -> None:
    lines = [f"{atoms.dim} {atoms.n}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in atoms.atoms]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class FlowConfig:
    """Integrator, capture and tolerance parameters.

    ``epsilon = 0`` selects the exact semi-discrete field, integrated in
    log-time ``tau = -log(1 - t)`` up to ``tau_max``. ``capture_alpha`` is the
    allowed deficit ``1 - alpha_k`` at which a trajectory inside the
    separation ball is declared captured.
    """

    epsilon: float = 0.0
    tau_max: float = 40.0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    capture_alpha: float = 1e-12
    max_steps: int = 100_000

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if not self.tau_max > 0:
            raise ValueError("tau_max must be > 0")
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.capture_alpha > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def replace(self, **changes) -> "FlowConfig":
        return FlowConfig(**{**asdict(self), **changes})


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned node grid with inclusive corners ``lo`` and ``hi``."""

    lo: tuple
    hi: tuple
    nx: int
    ny: int

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != 2 or len(self.hi) != 2:
            raise DimensionMismatch("grid corners must be 2D points")
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise ValueError("grid requires lo < hi componentwise")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid requires nx, ny >= 2")

    @classmethod
    def square(cls, half_width: float, n: int) -> "GridSpec":
        return cls((-half_width, -half_width), (half_width, half_width), n, n)

    @property
    def xs(self) -> np.ndarray:
        return self.lo[0] + (self.hi[0] - self.lo[0]) * (np.arange(self.nx) / (self.nx - 1))

    @property
    def ys(self) -> np.ndarray:
        return self.lo[1] + (self.hi[1] - self.lo[1]) * (np.arange(self.ny) / (self.ny - 1))

    @property
    def spacing(self) -> tuple:
        return ((self.hi[0] - self.lo[0]) / (self.nx - 1), (self.hi[1] - self.lo[1]) / (self.ny - 1))

    def points(self) -> np.ndarray:
        """Node coordinates of shape ``(nx, ny, 2)``; index ``[i, j]`` is (x_i, y_j)."""
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.stack([gx, gy], axis=-1)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.lo, self.hi, self.nx * factor, self.ny * factor)

    def index_of(self, point) -> tuple:
        """Nearest node index of a 2D point (clipped to the grid)."""
        hx, hy = self.spacing
        i = int(round((point[0] - self.lo[0]) / hx))
        j = int(round((point[1] - self.lo[1]) / hy))
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)


@dataclass(frozen=True)
class LabelField:
    """Rasterized cell labels; entries are UNRESOLVED (0) or 1..n.

    ``producer`` is one of ``FM``, ``FM_EPS(<eps>)``, ``LAGUERRE`` or
    ``NEAREST_TERMINAL``.
    """

    grid: GridSpec
    labels: np.ndarray
    producer: str
    n: int

    def __post_init__(self):
        if self.labels.shape != (self.grid.nx, self.grid.ny):
            raise DimensionMismatch(
                f"labels shape {self.labels.shape} does not match grid ({self.grid.nx}, {self.grid.ny})"
            )
        lab = self.labels
        if lab.size and (lab.min() < 0 or lab.max() > self.n):
            raise ValueError(f"labels must lie in 0..{self.n}")

    def resolved_fraction(self) -> float:
        return float(np.mean(self.labels != UNRESOLVED))

    def agreement(self, other: "LabelField") -> float:
        """Fraction of nodes with equal labels among nodes resolved in both fields."""
        both = (self.labels != UNRESOLVED) & (other.labels != UNRESOLVED)
        if not both.any():
            return float("nan")
        return float(np.mean(self.labels[both] == other.labels[both]))


@dataclass
class Trajectory:
    """Samples of one flow path.

    ``times`` are in [0, 1]; for the exact field they are derived from the
    log-times ``taus`` actually used by the integrator.
    """

    times: np.ndarray
    states: np.ndarray
    terminal: np.ndarray
    captured_by: Optional[int] = None
    capture_time: Optional[float] = None
    taus: Optional[np.ndarray] = None
    steps: int = 0

    @property
    def length(self) -> float:
        pts = self.states
        if self.captured_by is not None:
            pts = np.vstack([pts, self.terminal])
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: Any
    threshold: Any
    details: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: measured={self.measured!r} threshold={self.threshold!r} {self.details}".rstrip()


@dataclass
class RunReport:
    command: str
    config: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        raw = json.loads(text)
        raw["checks"] = [CheckResult(**c) for c in raw.get("checks", [])]
        return cls(**raw)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RunReport":
        return cls.from_json(Path(path).read_text())

    def summary(self) -> str:
        lines = [f"{self.command}: {'PASS' if self.passed else 'FAIL'} ({self.wall_time:.2f}s)"]
        lines += ["  " + c.line() for c in self.checks]
        return "\n".join(lines)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a float array of shape ``(m, dim)``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[-1] != dim:
        raise DimensionMismatch(f"points have dimension {arr.shape[-1]}, atoms have {dim}")
    return np.ascontiguousarray(arr.reshape(-1, dim))

