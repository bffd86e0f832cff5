"""Numba-jitted recurrence kernels; same contracts as kernels_numpy.

Explicit element loops instead of BLAS calls: at H of a few dozen the call
overhead dominates, and scalar loops keep the arithmetic order fixed so a
run is bit-reproducible against itself.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _sigmoid_scalar(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    ex = np.exp(x)
    return ex / (1.0 + ex)


@njit(cache=True)
def lstm_core_forward(Ax, Wh, h0, c0):
    T = Ax.shape[0]
    H = Wh.shape[1]
    H_out = np.empty((T, H), dtype=np.float64)
    C_out = np.empty((T, H), dtype=np.float64)
    G = np.empty((T, 4 * H), dtype=np.float64)
    h = h0.copy()
    c = c0.copy()
    a = np.empty(4 * H, dtype=np.float64)
    for t in range(T):
        for r in range(4 * H):
            acc = Ax[t, r]
            for k in range(H):
                acc += Wh[r, k] * h[k]
            a[r] = acc
        for k in range(H):
            i = _sigmoid_scalar(a[k])
            f = _sigmoid_scalar(a[H + k])
            g = np.tanh(a[2 * H + k])
            o = _sigmoid_scalar(a[3 * H + k])
            c[k] = f * c[k] + i * g
            h[k] = o * np.tanh(c[k])
            G[t, k] = i
            G[t, H + k] = f
            G[t, 2 * H + k] = g
            G[t, 3 * H + k] = o
            H_out[t, k] = h[k]
            C_out[t, k] = c[k]
    return H_out, C_out, G


@njit(cache=True)
def lstm_core_backward(Wh, h0, c0, H_out, C_out, G, dH_ext):
    T = dH_ext.shape[0]
    H = dH_ext.shape[1]
    dA = np.empty((T, 4 * H), dtype=np.float64)
    dWh = np.zeros_like(Wh)
    dh = np.zeros(H, dtype=np.float64)
    dc = np.zeros(H, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        for k in range(H):
            dh[k] += dH_ext[t, k]
            i = G[t, k]
            f = G[t, H + k]
            g = G[t, 2 * H + k]
            o = G[t, 3 * H + k]
            c_prev = C_out[t - 1, k] if t > 0 else c0[k]
            tc = np.tanh(C_out[t, k])
            do = dh[k] * tc
            dck = dc[k] + dh[k] * o * (1.0 - tc * tc)
            di = dck * g
            df = dck * c_prev
            dg = dck * i
            dA[t, k] = di * i * (1.0 - i)
            dA[t, H + k] = df * f * (1.0 - f)
            dA[t, 2 * H + k] = dg * (1.0 - g * g)
            dA[t, 3 * H + k] = do * o * (1.0 - o)
            dc[k] = dck * f
        for r in range(4 * H):
            row = dA[t, r]
            if t > 0:
                for k in range(H):
                    dWh[r, k] += row * H_out[t - 1, k]
            else:
                for k in range(H):
                    dWh[r, k] += row * h0[k]
        for k in range(H):
            acc = 0.0
            for r in range(4 * H):
                acc += Wh[r, k] * dA[t, r]
            dh[k] = acc
    return dA, dWh, dh, dc
