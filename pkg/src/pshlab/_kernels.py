"""DOP853 integration kernel for quadratic homogeneous fields on R^3.

Compiled with numba unless ``PSHLAB_DISABLE_NUMBA`` is set, in which case the
identical code runs as plain Python (see ``_accel``).
"""

from __future__ import annotations

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from ._accel import njit

N_STAGES = _dop.N_STAGES
A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES])
B = np.ascontiguousarray(_dop.B)
C = np.ascontiguousarray(_dop.C[:N_STAGES])
E3 = np.ascontiguousarray(_dop.E3)
E5 = np.ascontiguousarray(_dop.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0
STEP_FLOOR = 1e-14

# kernel exit codes
REACHED_END = 0
CROSSED_THRESHOLD = 1
BUFFER_FULL = 2
NONFINITE = 3
STEP_TOO_SMALL = 4


@njit(cache=True)
def quadratic_field(T, y, out):
    for k in range(3):
        acc = 0.0
        for i in range(3):
            yi = y[i]
            for j in range(3):
                acc += T[k, i, j] * yi * y[j]
        out[k] = acc


@njit(cache=True)
def initial_step(T, y0, f0, rtol, atol):
    """Hairer-Wanner starting step for an order-8 method."""
    d0 = 0.0
    d1 = 0.0
    for i in range(3):
        sc = atol + abs(y0[i]) * rtol
        d0 += (y0[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = np.sqrt(d0 / 3.0)
    d1 = np.sqrt(d1 / 3.0)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = np.empty(3)
    f1 = np.empty(3)
    for i in range(3):
        y1[i] = y0[i] + h0 * f0[i]
    quadratic_field(T, y1, f1)
    d2 = 0.0
    for i in range(3):
        sc = atol + abs(y0[i]) * rtol
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = np.sqrt(d2 / 3.0) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1)


@njit(cache=True)
def dop853_run(T, t0, y0, h, t_end, rtol, atol, threshold, ts, ys,
               A, B, C, E3, E5):
    """Advance from ``(t0, y0)`` storing accepted steps into ``ts``/``ys``.

    ``ts[0], ys[0]`` receive the start point. Returns ``(n_stored, code, h)``.
    ``h <= 0`` requests an automatic first step.
    """
    cap = ts.shape[0]
    K = np.zeros((N_STAGES + 1, 3))
    y = y0.copy()
    y_new = np.empty(3)
    stage = np.empty(3)
    f = np.empty(3)
    quadratic_field(T, y, f)
    t = t0
    ts[0] = t
    for i in range(3):
        ys[0, i] = y[i]
    n = 1
    if h <= 0.0:
        h = initial_step(T, y, f, rtol, atol)
    while True:
        if t >= t_end:
            return n, REACHED_END, h
        if n >= cap:
            return n, BUFFER_FULL, h
        h_floor = STEP_FLOOR * max(1.0, abs(t))
        accepted = False
        while not accepted:
            if h < h_floor:
                return n, STEP_TOO_SMALL, h
            last = False
            if t + h >= t_end:
                h = t_end - t
                last = True
            for i in range(3):
                K[0, i] = f[i]
            for s in range(1, N_STAGES):
                for i in range(3):
                    acc = 0.0
                    for j in range(s):
                        acc += A[s, j] * K[j, i]
                    stage[i] = y[i] + h * acc
                quadratic_field(T, stage, K[s])
            for i in range(3):
                acc = 0.0
                for j in range(N_STAGES):
                    acc += B[j] * K[j, i]
                y_new[i] = y[i] + h * acc
            quadratic_field(T, y_new, K[N_STAGES])
            err5 = 0.0
            err3 = 0.0
            for i in range(3):
                sc = atol + max(abs(y[i]), abs(y_new[i])) * rtol
                a5 = 0.0
                a3 = 0.0
                for j in range(N_STAGES + 1):
                    a5 += E5[j] * K[j, i]
                    a3 += E3[j] * K[j, i]
                err5 += (a5 / sc) ** 2
                err3 += (a3 / sc) ** 2
            if err5 == 0.0 and err3 == 0.0:
                err = 0.0
            else:
                err = h * err5 / np.sqrt((err5 + 0.01 * err3) * 3.0)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** ERROR_EXPONENT)
                accepted = True
                t = t_end if last else t + h
                h = h * factor
            else:
                if err != err:
                    factor = MIN_FACTOR
                else:
                    factor = max(MIN_FACTOR, SAFETY * err ** ERROR_EXPONENT)
                h = h * factor
        norm2 = 0.0
        finite = True
        for i in range(3):
            y[i] = y_new[i]
            f[i] = K[N_STAGES, i]
            ys[n, i] = y[i]
            norm2 += y[i] * y[i]
            if not np.isfinite(y[i]):
                finite = False
        ts[n] = t
        n += 1
        if not finite:
            return n, NONFINITE, h
        if norm2 > threshold * threshold:
            return n, CROSSED_THRESHOLD, h


def run(T, t0, y0, t_end, rtol, atol, threshold, capacity, h=0.0):
    ts = np.empty(capacity)
    ys = np.empty((capacity, 3))
    n, code, h = dop853_run(np.ascontiguousarray(T, dtype=np.float64), float(t0),
                            np.asarray(y0, dtype=np.float64).copy(), float(h), float(t_end),
                            float(rtol), float(atol), float(threshold), ts, ys, A, B, C, E3, E5)
    return ts[:n], ys[:n], int(code), float(h)
