"""Closed-form flow-matching velocities for a Gaussian source and a uniform
discrete target, plus the analytic Jacobian of the exact field.

All functions accept a single point of shape ``(d,)`` or a batch ``(m, d)``
and return arrays of matching leading shape.
"""

from __future__ import annotations

import math

import numpy as np

from .core import AtomSet, InvalidTime


def _check_time(t: float, epsilon: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise InvalidTime(f"t={t} outside [0, 1]")
    if epsilon == 0.0 and t >= 1.0:
        raise InvalidTime("the exact field is singular at t = 1")


def _variance(t: float, epsilon: float) -> float:
    return (1.0 - t) ** 2 + (t * epsilon) ** 2


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


def _sqdist_to_scaled_atoms(t: float, x: np.ndarray, atoms: np.ndarray) -> np.ndarray:
    diff = x[..., None, :] - t * atoms
    return np.sum(diff * diff, axis=-1)


def log_weights(t: float, x, atoms: AtomSet, epsilon: float = 0.0) -> np.ndarray:
    """Logits -||x - t a_k||^2 / (2 D) with D = (1-t)^2 + t^2 eps^2."""
    _check_time(t, epsilon)
    x = np.asarray(x, dtype=float)
    return -_sqdist_to_scaled_atoms(t, x, atoms.atoms) / (2.0 * _variance(t, epsilon))


def softmax_weights(t: float, x, atoms: AtomSet, epsilon: float = 0.0) -> np.ndarray:
    """Posterior assignment weights alpha_k(t, x); rows sum to one."""
    return _softmax_rows(log_weights(t, x, atoms, epsilon))


def velocity(t: float, x, atoms: AtomSet, epsilon: float = 0.0) -> np.ndarray:
    """v_t(x) for the exact target (epsilon = 0) or the Gaussian mixture target."""
    x = np.asarray(x, dtype=float)
    alpha = softmax_weights(t, x, atoms, epsilon)
    mean = alpha @ atoms.atoms
    if epsilon == 0.0:
        return (mean - x) / (1.0 - t)
    om = 1.0 - t
    return (om * (mean - x) + t * epsilon**2 * x) / _variance(t, epsilon)


def log_time_to_time(tau: float) -> float:
    return -math.expm1(-tau)


def time_to_log_time(t: float) -> float:
    if not 0.0 <= t < 1.0:
        raise InvalidTime(f"t={t} has no finite log-time")
    return -math.log1p(-t)


def bounded_drift(tau: float, x, atoms: AtomSet) -> np.ndarray:
    """(1 - t) v_t(x) = sum_k alpha_k (a_k - x) at t = 1 - exp(-tau).

    This is the right-hand side of the exact flow in log-time; its norm never
    exceeds max_k ||a_k - x||. Weights are formed directly from ``tau`` so that
    late times do not round t to 1.
    """
    if tau < 0:
        raise InvalidTime("tau must be >= 0")
    x = np.asarray(x, dtype=float)
    t = log_time_to_time(tau)
    logits = -_sqdist_to_scaled_atoms(t, x, atoms.atoms) * (0.5 * math.exp(2.0 * tau))
    alpha = _softmax_rows(logits)
    return alpha @ atoms.atoms - x


def velocity_jacobian(t: float, x, atoms: AtomSet) -> np.ndarray:
    """Analytic gradient of the exact field,

        grad v_t(x) = -I / (1-t) + t / (1-t)^3 * sum_l alpha_l (a_l - abar) a_l^T,

    where abar = sum_j alpha_j a_j. Returns ``(d, d)`` or ``(m, d, d)``.
    """
    _check_time(t, 0.0)
    x = np.asarray(x, dtype=float)
    a = atoms.atoms
    alpha = softmax_weights(t, x, atoms)
    abar = alpha @ a
    centered = a - abar[..., None, :]
    spread = np.einsum("...l,...li,lj->...ij", alpha, centered, a)
    eye = np.eye(atoms.dim)
    return -eye / (1.0 - t) + t / (1.0 - t) ** 3 * spread


def jacobian_norm_bound(t: float, x, atoms: AtomSet) -> np.ndarray:
    """1/(1-t) + 4 M^2 (1 - alpha_max) / (1-t)^3 with M = max_l ||a_l||."""
    alpha = softmax_weights(t, x, atoms)
    deficit = 1.0 - alpha.max(axis=-1)
    return 1.0 / (1.0 - t) + 4.0 * atoms.radius**2 * deficit / (1.0 - t) ** 3
