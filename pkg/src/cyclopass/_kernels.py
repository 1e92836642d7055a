"""Hot numeric loops, compiled with numba when available.

Set ``CYCLOPASS_DISABLE_NUMBA=1`` before import to force the pure-numpy
implementations. Both variants are always importable under explicit names
(``*_numba`` / ``*_numpy``) so they can be benchmarked and cross-checked.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CYCLOPASS_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def _rk4_affine_py(A, B, x0, u_nodes, u_mid, h):
    n = x0.shape[0]
    steps = u_mid.shape[0]
    X = np.empty((steps + 1, n))
    X[0] = x0
    x = x0.copy()
    for k in range(steps):
        bu0 = B @ u_nodes[k]
        bum = B @ u_mid[k]
        bu1 = B @ u_nodes[k + 1]
        k1 = A @ x + bu0
        k2 = A @ (x + 0.5 * h * k1) + bum
        k3 = A @ (x + 0.5 * h * k2) + bum
        k4 = A @ (x + h * k3) + bu1
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X[k + 1] = x
    return X


def _rk4_affine_loops(A, B, x0, u_nodes, u_mid, h):
    # explicit loops: numba compiles these to tight machine code
    n = x0.shape[0]
    m = B.shape[1]
    steps = u_mid.shape[0]
    X = np.empty((steps + 1, n))
    x = np.empty(n)
    for i in range(n):
        x[i] = x0[i]
        X[0, i] = x0[i]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    bu0 = np.empty(n)
    bum = np.empty(n)
    bu1 = np.empty(n)
    for k in range(steps):
        for i in range(n):
            a0 = 0.0
            am = 0.0
            a1 = 0.0
            for j in range(m):
                a0 += B[i, j] * u_nodes[k, j]
                am += B[i, j] * u_mid[k, j]
                a1 += B[i, j] * u_nodes[k + 1, j]
            bu0[i] = a0
            bum[i] = am
            bu1[i] = a1
        for i in range(n):
            acc = bu0[i]
            for j in range(n):
                acc += A[i, j] * x[j]
            k1[i] = acc
        for i in range(n):
            tmp[i] = x[i] + 0.5 * h * k1[i]
        for i in range(n):
            acc = bum[i]
            for j in range(n):
                acc += A[i, j] * tmp[j]
            k2[i] = acc
        for i in range(n):
            tmp[i] = x[i] + 0.5 * h * k2[i]
        for i in range(n):
            acc = bum[i]
            for j in range(n):
                acc += A[i, j] * tmp[j]
            k3[i] = acc
        for i in range(n):
            tmp[i] = x[i] + h * k3[i]
        for i in range(n):
            acc = bu1[i]
            for j in range(n):
                acc += A[i, j] * tmp[j]
            k4[i] = acc
        for i in range(n):
            x[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            X[k + 1, i] = x[i]
    return X


def _cumtrapz_py(t, s):
    out = np.zeros_like(s)
    if s.shape[0] > 1:
        out[1:] = np.cumsum(0.5 * (s[1:] + s[:-1]) * np.diff(t))
    return out


def _cumtrapz_loops(t, s):
    out = np.empty(s.shape[0])
    acc = 0.0
    if s.shape[0] > 0:
        out[0] = 0.0
    for k in range(1, s.shape[0]):
        acc += 0.5 * (s[k] + s[k - 1]) * (t[k] - t[k - 1])
        out[k] = acc
    return out


def _min_forward_gain_py(d):
    """Return (min_{i<=j} d[j]-d[i], i, j)."""
    run_max = np.maximum.accumulate(d)
    drops = d - run_max
    j = int(np.argmin(drops))
    i = int(np.argmax(d[: j + 1]))
    return float(drops[j]), i, j


def _min_forward_gain_loops(d):
    best = 0.0
    bi = 0
    bj = 0
    mi = 0
    for j in range(d.shape[0]):
        if d[j] > d[mi]:
            mi = j
        g = d[j] - d[mi]
        if g < best:
            best = g
            bi = mi
            bj = j
    return best, bi, bj


rk4_affine_numpy = _rk4_affine_py
cumtrapz_numpy = _cumtrapz_py
min_forward_gain_numpy = _min_forward_gain_py

if HAVE_NUMBA:
    rk4_affine_numba = njit(cache=True)(_rk4_affine_loops)
    cumtrapz_numba = njit(cache=True)(_cumtrapz_loops)
    min_forward_gain_numba = njit(cache=True)(_min_forward_gain_loops)
else:  # pragma: no cover
    rk4_affine_numba = _rk4_affine_py
    cumtrapz_numba = _cumtrapz_py
    min_forward_gain_numba = _min_forward_gain_py

if USE_NUMBA:
    rk4_affine = rk4_affine_numba
    cumtrapz = cumtrapz_numba
    min_forward_gain = min_forward_gain_numba
else:
    rk4_affine = rk4_affine_numpy
    cumtrapz = cumtrapz_numpy
    min_forward_gain = min_forward_gain_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
