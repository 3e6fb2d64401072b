"""Compiled per-point kernels.

Every kernel integrates one point with scalar loops so that the result of a
point never depends on how a batch is partitioned.

Two right-hand sides are supported:

* ``MODE_TAU``: the exact field in log-time, dx/dtau = sum_k alpha_k (a_k - x)
  with t = 1 - exp(-tau).
* ``MODE_GMM``: the Gaussian-mixture field v^eps_t(x) in plain time.
"""

import math

import numba as nb
import numpy as np

MODE_TAU = 0
MODE_GMM = 1

OK = 0
CAPTURED = 1
STEP_LIMIT = 2
NONFINITE = 3

# Dormand-Prince 5(4)
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@nb.njit(cache=True, nogil=True)
def log_weights(s, x, atoms, eps, mode, out):
    """Unnormalized log-weights into ``out``; returns their maximum."""
    n, d = atoms.shape
    if mode == MODE_TAU:
        t = -math.expm1(-s)
        inv2D = 0.5 * math.exp(2.0 * s)
    else:
        t = s
        om = 1.0 - t
        inv2D = 0.5 / (om * om + t * t * eps * eps)
    m = -np.inf
    for k in range(n):
        acc = 0.0
        for j in range(d):
            diff = x[j] - t * atoms[k, j]
            acc += diff * diff
        lk = -acc * inv2D
        out[k] = lk
        if lk > m:
            m = lk
    return m


@nb.njit(cache=True, nogil=True)
def softmax(s, x, atoms, eps, mode, out):
    """Normalized weights into ``out`` via max subtraction."""
    n = atoms.shape[0]
    m = log_weights(s, x, atoms, eps, mode, out)
    tot = 0.0
    for k in range(n):
        out[k] = math.exp(out[k] - m)
        tot += out[k]
    for k in range(n):
        out[k] /= tot


@nb.njit(cache=True, nogil=True)
def rhs(s, x, atoms, eps, mode, w, out):
    n, d = atoms.shape
    softmax(s, x, atoms, eps, mode, w)
    for j in range(d):
        out[j] = 0.0
    if mode == MODE_TAU:
        for k in range(n):
            for j in range(d):
                out[j] += w[k] * (atoms[k, j] - x[j])
    else:
        t = s
        om = 1.0 - t
        D = om * om + t * t * eps * eps
        for k in range(n):
            for j in range(d):
                out[j] += w[k] * (om * (atoms[k, j] - x[j]) + t * eps * eps * x[j])
        for j in range(d):
            out[j] /= D


@nb.njit(cache=True, nogil=True)
def capture_test(s, x, atoms, sep_radius, cap_alpha, w):
    """Index of the capturing atom or -1.

    Capture requires ||x - a_k|| < sep_radius and 1 - alpha_k <= cap_alpha,
    where 1 - alpha_k is summed from the other weights to avoid cancellation.
    """
    n, d = atoms.shape
    best = -1
    bd = np.inf
    for k in range(n):
        acc = 0.0
        for j in range(d):
            diff = x[j] - atoms[k, j]
            acc += diff * diff
        if acc < bd:
            bd = acc
            best = k
    if math.sqrt(bd) >= sep_radius:
        return -1
    m = log_weights(s, x, atoms, 0.0, MODE_TAU, w)
    tot = 0.0
    other = 0.0
    for k in range(n):
        e = math.exp(w[k] - m)
        tot += e
        if k != best:
            other += e
    if other / tot <= cap_alpha:
        return best
    return -1


@nb.njit(cache=True, nogil=True)
def dopri(x0, s0, s1, atoms, eps, mode, rtol, atol, sep_radius, cap_alpha, capture,
          max_steps, rec, xout):
    """Adaptive Dormand-Prince integration of one point from s0 to s1.

    Writes the final state to ``xout``. If ``rec`` has rows, accepted samples
    (s, x...) are stored there and their count returned in the result tuple.
    Returns ``(status, s_end, captured_atom, n_steps, n_rec)``.
    """
    n, d = atoms.shape
    x = x0.copy()
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    k5 = np.empty(d)
    k6 = np.empty(d)
    k7 = np.empty(d)
    y = np.empty(d)
    xn = np.empty(d)
    w = np.empty(n)
    nrec = rec.shape[0]
    irec = 0
    if nrec > 0:
        rec[0, 0] = s0
        for j in range(d):
            rec[0, j + 1] = x[j]
        irec = 1
    direction = 1.0 if s1 >= s0 else -1.0
    span = abs(s1 - s0)
    s = s0
    h = min(1e-3, span)
    rhs(s, x, atoms, eps, mode, w, k1)
    steps = 0
    if capture:
        k = capture_test(s, x, atoms, sep_radius, cap_alpha, w)
        if k >= 0:
            for j in range(d):
                xout[j] = x[j]
            return CAPTURED, s, k, 0, irec
    while direction * (s1 - s) > 0.0:
        if steps >= max_steps:
            for j in range(d):
                xout[j] = x[j]
            return STEP_LIMIT, s, -1, steps, irec
        last = False
        if h >= direction * (s1 - s):
            h = direction * (s1 - s)
            last = True
        hs = direction * h
        for j in range(d):
            y[j] = x[j] + hs * A21 * k1[j]
        rhs(s + C2 * hs, y, atoms, eps, mode, w, k2)
        for j in range(d):
            y[j] = x[j] + hs * (A31 * k1[j] + A32 * k2[j])
        rhs(s + C3 * hs, y, atoms, eps, mode, w, k3)
        for j in range(d):
            y[j] = x[j] + hs * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
        rhs(s + C4 * hs, y, atoms, eps, mode, w, k4)
        for j in range(d):
            y[j] = x[j] + hs * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
        rhs(s + C5 * hs, y, atoms, eps, mode, w, k5)
        for j in range(d):
            y[j] = x[j] + hs * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j])
        s_new = s1 if last else s + hs
        rhs(s_new, y, atoms, eps, mode, w, k6)
        for j in range(d):
            xn[j] = x[j] + hs * (B1 * k1[j] + B3 * k3[j] + B4 * k4[j] + B5 * k5[j] + B6 * k6[j])
        rhs(s_new, xn, atoms, eps, mode, w, k7)
        err = 0.0
        finite = True
        for j in range(d):
            if not (math.isfinite(xn[j]) and math.isfinite(k7[j])):
                finite = False
            e = hs * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j])
            sc = atol + rtol * max(abs(x[j]), abs(xn[j]))
            err += (e / sc) * (e / sc)
        steps += 1
        if not finite:
            for j in range(d):
                xout[j] = x[j]
            return NONFINITE, s, -1, steps, irec
        err = math.sqrt(err / d)
        if err <= 1.0:
            s = s_new
            for j in range(d):
                x[j] = xn[j]
                k1[j] = k7[j]
            if irec < nrec:
                rec[irec, 0] = s
                for j in range(d):
                    rec[irec, j + 1] = x[j]
                irec += 1
            if capture:
                k = capture_test(s, x, atoms, sep_radius, cap_alpha, w)
                if k >= 0:
                    for j in range(d):
                        xout[j] = x[j]
                    return CAPTURED, s, k, steps, irec
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14 * max(1.0, abs(s)):
                for j in range(d):
                    xout[j] = x[j]
                return STEP_LIMIT, s, -1, steps, irec
    for j in range(d):
        xout[j] = x[j]
    return OK, s, -1, steps, irec


@nb.njit(cache=True, nogil=True)
def nearest_label(x, atoms, tie_tol):
    """1-based nearest atom, or 0 when the two smallest distances tie within tie_tol."""
    n, d = atoms.shape
    b1 = np.inf
    b2 = np.inf
    k1 = -1
    for k in range(n):
        acc = 0.0
        for j in range(d):
            diff = x[j] - atoms[k, j]
            acc += diff * diff
        dk = math.sqrt(acc)
        if dk < b1:
            b2 = b1
            b1 = dk
            k1 = k
        elif dk < b2:
            b2 = dk
    if n > 1 and b2 - b1 <= tie_tol:
        return 0
    return k1 + 1


@nb.njit(cache=True, nogil=True)
def assign_batch(points, atoms, eps, tau_max, rtol, atol, sep_radius, cap_alpha, max_steps,
                 labels, terminals, status):
    """Terminal labels (1-based, 0 unresolved) and terminal points of many starts."""
    m = points.shape[0]
    rec = np.empty((0, atoms.shape[1] + 1))
    xout = np.empty(atoms.shape[1])
    for i in range(m):
        if eps == 0.0:
            st, s, k, steps, nr = dopri(points[i], 0.0, tau_max, atoms, 0.0, MODE_TAU, rtol, atol,
                                        sep_radius, cap_alpha, True, max_steps, rec, xout)
            status[i] = st
            if st == CAPTURED:
                labels[i] = k + 1
                terminals[i] = atoms[k]
            else:
                labels[i] = 0
                terminals[i] = xout
        else:
            st, s, k, steps, nr = dopri(points[i], 0.0, 1.0, atoms, eps, MODE_GMM, rtol, atol,
                                        sep_radius, cap_alpha, False, max_steps, rec, xout)
            status[i] = st
            terminals[i] = xout
            labels[i] = nearest_label(xout, atoms, 1e-9) if st == OK else 0


@nb.njit(cache=True, nogil=True)
def euler_batch(points, atoms, dtau, tau_max, sep_radius, cap_alpha, labels):
    """Fixed-step explicit Euler in log-time; capture rule as the adaptive path."""
    m = points.shape[0]
    n, d = atoms.shape
    w = np.empty(n)
    f = np.empty(d)
    x = np.empty(d)
    nsteps = int(round(tau_max / dtau))
    for i in range(m):
        for j in range(d):
            x[j] = points[i, j]
        labels[i] = 0
        for it in range(nsteps):
            tau = it * dtau
            rhs(tau, x, atoms, 0.0, MODE_TAU, w, f)
            for j in range(d):
                x[j] += dtau * f[j]
            k = capture_test(tau + dtau, x, atoms, sep_radius, cap_alpha, w)
            if k >= 0:
                labels[i] = k + 1
                break


@nb.njit(cache=True, nogil=True)
def rk4_backward(x0, tau0, h, atoms, xout):
    """Classical RK4 on the log-time drift from tau0 down to 0.

    The step is ``h`` with the first step shortened so that all calls share the
    grid {j * h}; trajectories started at different tau0 see identical steps
    below their common range.
    """
    n, d = atoms.shape
    w = np.empty(n)
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    y = np.empty(d)
    x = x0.copy()
    m = int(math.floor(tau0 / h + 1e-9))
    s = tau0
    while s > 0.0:
        target = m * h if m * h < s - 1e-15 else (m - 1) * h
        if target < 0.0:
            target = 0.0
        m = int(round(target / h))
        hs = target - s
        rhs(s, x, atoms, 0.0, MODE_TAU, w, k1)
        for j in range(d):
            y[j] = x[j] + 0.5 * hs * k1[j]
        rhs(s + 0.5 * hs, y, atoms, 0.0, MODE_TAU, w, k2)
        for j in range(d):
            y[j] = x[j] + 0.5 * hs * k2[j]
        rhs(s + 0.5 * hs, y, atoms, 0.0, MODE_TAU, w, k3)
        for j in range(d):
            y[j] = x[j] + hs * k3[j]
        rhs(target, y, atoms, 0.0, MODE_TAU, w, k4)
        for j in range(d):
            x[j] += hs / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        s = target
    for j in range(d):
        xout[j] = x[j]
