"""Forward and backward integration of the flow, terminal assignment, grid
tessellation and cell-center curves.

The exact field is integrated in log-time tau = -log(1 - t), where it becomes
the bounded drift sum_k alpha_k (a_k - x). A trajectory is declared captured
by atom k once it sits inside the separation ball of a_k with alpha_k within
``capture_alpha`` of one; its terminal point is then a_k exactly.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .core import (
    UNRESOLVED,
    AtomSet,
    FlowConfig,
    GridSpec,
    InvalidTime,
    LabelField,
    NonFiniteState,
    StepLimitExceeded,
    Trajectory,
    as_points,
)
from .velocity import log_time_to_time, time_to_log_time

NEAREST_TIE_TOL = 1e-9
_CHUNK = 2048


def worker_count() -> int:
    """Thread cap from ``SDFM_THREADS`` (default: all CPUs)."""
    env = os.environ.get("SDFM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class CaptureEvent:
    atom: int
    time: float
    residual: float


@dataclass
class BatchResult:
    labels: np.ndarray
    terminals: np.ndarray
    status: np.ndarray

    @property
    def resolved(self) -> np.ndarray:
        return self.labels != UNRESOLVED


@dataclass
class CenterCurve:
    """Samples of t -> gamma_t^{-1}(a_k), starting from (0, a_k)."""

    k: int
    times: np.ndarray
    points: np.ndarray
    limit: np.ndarray
    arc_length: float
    gaps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cauchy: bool = True

    @property
    def samples(self):
        return list(zip(self.times.tolist(), self.points))


def _raise_for_status(status: int, where: str) -> None:
    if status == K.STEP_LIMIT:
        raise StepLimitExceeded(f"{where}: step limit exceeded")
    if status == K.NONFINITE:
        raise NonFiniteState(f"{where}: non-finite state encountered")


def integrate_forward(x0, atoms: AtomSet, cfg: FlowConfig = FlowConfig(), record: bool = True) -> Trajectory:
    """Integrate one start point to its terminal point.

    With ``cfg.epsilon == 0`` the run stops at capture (terminal = atom) or at
    ``tau_max`` (terminal = last state, ``captured_by`` None). With
    ``epsilon > 0`` the Gaussian-mixture field is integrated on t in [0, 1].
    Atom indices in the returned trajectory are 1-based.
    """
    x = as_points(x0, atoms.dim)[0]
    d = atoms.dim
    rec = np.empty((cfg.max_steps + 2 if record else 0, d + 1))
    xout = np.empty(d)
    if cfg.epsilon == 0.0:
        status, s_end, k, steps, nrec = K.dopri(
            x, 0.0, cfg.tau_max, atoms.atoms, 0.0, K.MODE_TAU, cfg.rel_tol, cfg.abs_tol,
            atoms.sep_radius, cfg.capture_alpha, True, cfg.max_steps, rec, xout,
        )
    else:
        status, s_end, k, steps, nrec = K.dopri(
            x, 0.0, 1.0, atoms.atoms, cfg.epsilon, K.MODE_GMM, cfg.rel_tol, cfg.abs_tol,
            atoms.sep_radius, cfg.capture_alpha, False, cfg.max_steps, rec, xout,
        )
    _raise_for_status(status, f"integrate_forward({x.tolist()})")
    rec = rec[:nrec]
    if cfg.epsilon == 0.0:
        taus = rec[:, 0].copy()
        times = -np.expm1(-taus)
    else:
        taus = None
        times = rec[:, 0].copy()
    states = rec[:, 1:].copy()
    if record and len(times) > 1:
        # late log-times round to t = 1; keep the first sample of each t
        keep = np.concatenate([[True], np.diff(times) > 0])
        times, states = times[keep], states[keep]
        if taus is not None:
            taus = taus[keep]
    if status == K.CAPTURED:
        return Trajectory(times, states, atoms.atoms[k].copy(), k + 1, log_time_to_time(s_end), taus, steps)
    return Trajectory(times, states, xout.copy(), None, None, taus, steps)


def capture_event(traj: Trajectory, atoms: AtomSet) -> Optional[CaptureEvent]:
    if traj.captured_by is None:
        return None
    k = traj.captured_by
    return CaptureEvent(k, traj.capture_time, float(np.linalg.norm(traj.states[-1] - atoms.atoms[k - 1])))


def flow_map(x0, t: float, atoms: AtomSet, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """gamma_t(x0) for t < 1 (exact field, no capture) or t <= 1 (mixture field)."""
    pts = as_points(x0, atoms.dim)
    out = np.empty_like(pts)
    rec = np.empty((0, atoms.dim + 1))
    if cfg.epsilon == 0.0:
        s1, mode = time_to_log_time(t), K.MODE_TAU
    else:
        if not 0.0 <= t <= 1.0:
            raise InvalidTime(f"t={t} outside [0, 1]")
        s1, mode = t, K.MODE_GMM
    for i, p in enumerate(pts):
        if s1 == 0.0:
            out[i] = p
            continue
        status, *_ = K.dopri(p, 0.0, s1, atoms.atoms, cfg.epsilon, mode, cfg.rel_tol, cfg.abs_tol,
                             atoms.sep_radius, cfg.capture_alpha, False, cfg.max_steps, rec, out[i])
        _raise_for_status(status, "flow_map")
    return out[0] if np.ndim(x0) == 1 else out


def assign_many(points, atoms: AtomSet, cfg: FlowConfig = FlowConfig(), workers: Optional[int] = None) -> BatchResult:
    """Terminal labels of many start points.

    Failed or uncaptured points get UNRESOLVED; they never abort the batch.
    Work is split in fixed chunks over threads; each point is integrated on
    its own, so results do not depend on the split.
    """
    pts = as_points(points, atoms.dim)
    m = len(pts)
    labels = np.zeros(m, dtype=np.int64)
    terminals = np.empty_like(pts)
    status = np.zeros(m, dtype=np.int64)

    def run(lo: int) -> None:
        hi = min(lo + _CHUNK, m)
        K.assign_batch(pts[lo:hi], atoms.atoms, float(cfg.epsilon), cfg.tau_max, cfg.rel_tol, cfg.abs_tol,
                       atoms.sep_radius, cfg.capture_alpha, cfg.max_steps,
                       labels[lo:hi], terminals[lo:hi], status[lo:hi])

    starts = range(0, m, _CHUNK)
    nw = min(workers or worker_count(), max(1, len(starts)))
    if nw <= 1:
        for lo in starts:
            run(lo)
    else:
        with ThreadPoolExecutor(nw) as pool:
            list(pool.map(run, starts))
    return BatchResult(labels, terminals, status)


def assign(x0, atoms: AtomSet, cfg: FlowConfig = FlowConfig()) -> int:
    """Cell label (1..n) of a start point, or UNRESOLVED.

    Exact field: the capturing atom. Mixture field: the atom nearest to the
    terminal point, UNRESOLVED on near ties.
    """
    return int(assign_many(x0, atoms, cfg).labels[0])


def terminal_map(points, atoms: AtomSet, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """gamma_1 (or gamma_1^eps) of each point; captured points map to their atom."""
    res = assign_many(points, atoms, cfg)
    bad = res.status == K.NONFINITE
    if bad.any():
        raise NonFiniteState(f"{int(bad.sum())} points produced non-finite states")
    return res.terminals


def producer_tag(cfg: FlowConfig) -> str:
    return "FM" if cfg.epsilon == 0.0 else f"FM_EPS({cfg.epsilon!r})"


@dataclass(frozen=True)
class Plane:
    """Affine 2-plane {origin + s u + r w} used to rasterize d > 2 atom sets."""

    origin: np.ndarray
    u: np.ndarray
    w: np.ndarray

    def lift(self, pts2: np.ndarray) -> np.ndarray:
        return self.origin + pts2[..., :1] * self.u + pts2[..., 1:2] * self.w


def plane_inside_hull(plane: Plane, atoms: AtomSet, tol: float = 1e-9) -> bool:
    """True when both plane directions lie in the span of the atom differences."""
    diffs = atoms.atoms[1:] - atoms.atoms[0]
    if len(diffs) == 0:
        return False
    q, r = np.linalg.qr(diffs.T)
    rank = int(np.sum(np.abs(np.diag(r)) > tol)) if r.size else 0
    basis = q[:, :rank]
    for v in (plane.u, plane.w):
        if np.linalg.norm(v - basis @ (basis.T @ v)) > tol * max(1.0, np.linalg.norm(v)):
            return False
    return True


def tessellate(atoms: AtomSet, grid: GridSpec, cfg: FlowConfig = FlowConfig(), plane: Optional[Plane] = None,
               workers: Optional[int] = None) -> LabelField:
    """Rasterize the terminal assignment cells on ``grid``."""
    pts = grid.points().reshape(-1, 2)
    if atoms.dim != 2:
        if plane is None:
            raise ValueError("atoms with d != 2 need a rasterization plane")
        pts = plane.lift(pts)
    res = assign_many(pts, atoms, cfg, workers)
    return LabelField(grid, res.labels.reshape(grid.nx, grid.ny), producer_tag(cfg), atoms.n)


def euler_labels(points, atoms: AtomSet, dtau: float = 1e-4, tau_max: float = 40.0,
                 capture_alpha: float = 1e-12) -> np.ndarray:
    """Reference labels from fixed-step explicit Euler in log-time."""
    pts = as_points(points, atoms.dim)
    labels = np.zeros(len(pts), dtype=np.int64)

    def run(lo: int) -> None:
        hi = min(lo + 256, len(pts))
        K.euler_batch(pts[lo:hi], atoms.atoms, dtau, tau_max, atoms.sep_radius, capture_alpha, labels[lo:hi])

    starts = range(0, len(pts), 256)
    nw = min(worker_count(), max(1, len(starts)))
    if nw <= 1:
        for lo in starts:
            run(lo)
    else:
        with ThreadPoolExecutor(nw) as pool:
            list(pool.map(run, starts))
    return labels


def euler_tessellate(atoms: AtomSet, grid: GridSpec, dtau: float = 1e-4, tau_max: float = 40.0) -> LabelField:
    labels = euler_labels(grid.points().reshape(-1, 2), atoms, dtau, tau_max)
    return LabelField(grid, labels.reshape(grid.nx, grid.ny), "NEAREST_TERMINAL", atoms.n)


def dyadic_schedule(levels: int = 20) -> np.ndarray:
    return 1.0 - 2.0 ** -np.arange(1, levels + 1, dtype=float)


def center_curve(k: int, atoms: AtomSet, cfg: FlowConfig = FlowConfig(), schedule: Optional[Sequence[float]] = None,
                 substeps: int = 256) -> CenterCurve:
    """Backward images gamma_t^{-1}(a_k) along a schedule of times.

    Each sample integrates the log-time drift from tau(t) back to 0 starting
    at a_k, with classical RK4 on the shared grid {j * ln2 / substeps}. Using
    one grid for all samples keeps their differences free of step-selection
    noise, so the gap sequence reflects the curve rather than the integrator.
    ``k`` is 1-based.
    """
    if not 1 <= k <= atoms.n:
        raise IndexError(f"atom index {k} outside 1..{atoms.n}")
    sched = dyadic_schedule() if schedule is None else np.asarray(schedule, dtype=float)
    if np.any(np.diff(sched) <= 0) or sched[0] <= 0 or sched[-1] >= 1:
        raise ValueError("schedule must increase strictly inside (0, 1)")
    a = atoms.atoms[k - 1]
    h = math.log(2.0) / substeps
    pts = [a.copy()]
    out = np.empty(atoms.dim)
    for t in sched:
        K.rk4_backward(a.copy(), time_to_log_time(float(t)), h, atoms.atoms, out)
        if not np.all(np.isfinite(out)):
            raise NonFiniteState(f"center curve of atom {k} at t={t}")
        pts.append(out.copy())
    pts = np.array(pts)
    times = np.concatenate([[0.0], sched])
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    gaps = steps[1:]
    late = times[1:-1] > 0.99
    ok = True
    for g0, g1, is_late in zip(gaps[:-1], gaps[1:], late[:-1]):
        if is_late and not g1 <= 0.5 * g0:
            ok = False
    return CenterCurve(k, times, pts, pts[-1].copy(), float(steps.sum()), gaps, ok)


def backward_image(x, t: float, atoms: AtomSet, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """gamma_t^{-1}(x) by adaptive integration of the log-time drift back to 0."""
    p = as_points(x, atoms.dim)[0]
    out = np.empty(atoms.dim)
    status, *_ = K.dopri(p, time_to_log_time(t), 0.0, atoms.atoms, 0.0, K.MODE_TAU, cfg.rel_tol, cfg.abs_tol,
                         atoms.sep_radius, cfg.capture_alpha, False, cfg.max_steps, np.empty((0, atoms.dim + 1)), out)
    _raise_for_status(status, "backward_image")
    return out
