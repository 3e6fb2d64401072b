"""Semi-discrete optimal transport from N(0, I) to the uniform discrete target.

Laguerre cells L_k(psi) = {x : |x - a_k|^2 / 2 - psi_k <= |x - a_j|^2 / 2 - psi_j}.
The weights psi are found by gradient ascent on the Kantorovich dual

    F(psi) = E_x[min_k (|x - a_k|^2 / 2 - psi_k)] + mean_k psi_k,

whose gradient is 1/n - mu_0(L_k(psi)). The expectation uses one fixed set of
scrambled-Sobol Gaussian samples for the whole run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .core import UNRESOLVED, AtomSet, GridSpec, LabelField, LengthMismatch, as_points

TIE_TOL = 1e-12


@dataclass
class LaguerreWeights:
    psi: np.ndarray
    masses: np.ndarray
    residual: float
    iterations: int
    mc_samples: int
    seed: int
    converged: bool = True
    objective: float = float("nan")


def _costs(points: np.ndarray, atoms: AtomSet, psi: np.ndarray) -> np.ndarray:
    # |x|^2/2 is common to all k and dropped
    a = atoms.atoms
    return -(points @ a.T) + 0.5 * np.sum(a * a, axis=1) - psi


def _check_psi(atoms: AtomSet, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (atoms.n,):
        raise LengthMismatch(f"psi has shape {psi.shape}, expected ({atoms.n},)")
    return psi


def laguerre_assign(x, atoms: AtomSet, psi) -> np.ndarray | int:
    """1-based Laguerre cell of each point; UNRESOLVED on ties within 1e-12."""
    psi = _check_psi(atoms, psi)
    pts = as_points(x, atoms.dim)
    a = atoms.atoms
    diff = pts[:, None, :] - a[None, :, :]
    cost = 0.5 * np.sum(diff * diff, axis=-1) - psi
    order = np.argsort(cost, axis=1, kind="stable")
    best = order[:, 0]
    labels = best + 1
    if atoms.n > 1:
        c_sorted = np.take_along_axis(cost, order[:, :2], axis=1)
        labels = np.where(c_sorted[:, 1] - c_sorted[:, 0] <= TIE_TOL, UNRESOLVED, labels)
    labels = labels.astype(np.int64)
    return int(labels[0]) if np.ndim(x) == 1 else labels


def gaussian_samples(count: int, dim: int, seed: int) -> np.ndarray:
    """Deterministic standard-normal points from a scrambled Sobol sequence."""
    m = int(np.ceil(np.log2(count)))
    u = qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m)[:count]
    # Sobol points never hit 0 or 1 exactly after scrambling, but guard anyway
    u = np.clip(u, 1e-16, 1 - 1e-16)
    return ndtri(u)


def _masses_and_objective(samples: np.ndarray, atoms: AtomSet, psi: np.ndarray, half_sq: np.ndarray):
    cost = _costs(samples, atoms, psi)
    idx = np.argmin(cost, axis=1)
    counts = np.bincount(idx, minlength=atoms.n)
    masses = counts / len(samples)
    mins = cost[np.arange(len(samples)), idx] + half_sq
    objective = float(np.mean(mins)) + float(np.mean(psi))
    return masses, objective


def estimate_masses(atoms: AtomSet, psi, samples: np.ndarray) -> np.ndarray:
    psi = _check_psi(atoms, psi)
    half_sq = 0.5 * np.sum(samples * samples, axis=1)
    return _masses_and_objective(samples, atoms, psi, half_sq)[0]


def dual_objective(atoms: AtomSet, psi, samples: np.ndarray) -> float:
    psi = _check_psi(atoms, psi)
    half_sq = 0.5 * np.sum(samples * samples, axis=1)
    return _masses_and_objective(samples, atoms, psi, half_sq)[1]


def solve_weights(atoms: AtomSet, mc_samples: int = 200_000, seed: int = 0, tol: float = 1e-3,
                  max_iter: int = 10_000, step: float = 1.0, trace: list | None = None) -> LaguerreWeights:
    """Dual ascent psi <- psi + eta (1/n - masses) with halving backtracking.

    A step is accepted only if the sample estimate of the dual objective does
    not decrease; after an accepted step eta is doubled (capped at 64 * step).
    Returns the best iterate; ``converged`` is False if the residual
    max_k |mass_k - 1/n| is still above ``tol`` at the end.
    """
    if mc_samples < 10_000:
        raise ValueError("mc_samples must be >= 1e4")
    if tol < 1e-4:
        raise ValueError("tol must be >= 1e-4")
    n = atoms.n
    samples = gaussian_samples(mc_samples, atoms.dim, seed)
    half_sq = 0.5 * np.sum(samples * samples, axis=1)
    psi = np.zeros(n)
    masses, obj = _masses_and_objective(samples, atoms, psi, half_sq)
    eta = step
    it = 0
    residual = float(np.max(np.abs(masses - 1.0 / n)))
    while residual > tol and it < max_iter:
        it += 1
        grad = 1.0 / n - masses
        while True:
            cand = psi + eta * grad
            m_c, o_c = _masses_and_objective(samples, atoms, cand, half_sq)
            if o_c >= obj or eta < 1e-12:
                break
            eta *= 0.5
        if o_c < obj:
            break
        psi, masses, obj = cand, m_c, o_c
        if trace is not None:
            trace.append(obj)
        residual = float(np.max(np.abs(masses - 1.0 / n)))
        eta = min(2.0 * eta, 64.0 * step)
    psi = psi - psi.min()
    return LaguerreWeights(psi, masses, residual, it, mc_samples, seed, residual <= tol, obj)


def tessellate_laguerre(atoms: AtomSet, psi, grid: GridSpec) -> LabelField:
    if atoms.dim != 2:
        raise ValueError("Laguerre rasterization needs 2D atoms")
    labels = laguerre_assign(grid.points().reshape(-1, 2), atoms, psi)
    return LabelField(grid, np.asarray(labels).reshape(grid.nx, grid.ny), "LAGUERRE", atoms.n)


def gaussian_grid_masses(field_: LabelField) -> np.ndarray:
    """Standard-normal mass of each rasterized cell by trapezoid-weighted node sums."""
    grid = field_.grid
    hx, hy = grid.spacing
    wx = np.full(grid.nx, hx)
    wx[[0, -1]] *= 0.5
    wy = np.full(grid.ny, hy)
    wy[[0, -1]] *= 0.5
    dens = np.outer(wx * np.exp(-0.5 * grid.xs**2), wy * np.exp(-0.5 * grid.ys**2)) / (2 * np.pi)
    return np.array([dens[field_.labels == k].sum() for k in range(1, field_.n + 1)])
