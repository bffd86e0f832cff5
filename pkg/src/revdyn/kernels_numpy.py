"""Pure-numpy recurrence kernels (reference path).

The sequential LSTM recurrence is the serial hot loop of both the entity
state updates and the per-review language model; everything around it
(input projections, output logits) is batched BLAS and stays outside.
``Ax`` carries the precomputed input projection ``X @ Wx.T + b`` per step.
Gate layout along the 4H axis is [input | forget | candidate | output].
"""

from __future__ import annotations

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_core_forward(Ax, Wh, h0, c0):
    """Run the gate recurrence; returns hidden states, cells, and post-activation gates."""
    T = Ax.shape[0]
    H = Wh.shape[1]
    H_out = np.empty((T, H), dtype=np.float64)
    C_out = np.empty((T, H), dtype=np.float64)
    G = np.empty((T, 4 * H), dtype=np.float64)
    h = h0
    c = c0
    for t in range(T):
        a = Ax[t] + Wh @ h
        i = sigmoid(a[0:H])
        f = sigmoid(a[H : 2 * H])
        g = np.tanh(a[2 * H : 3 * H])
        o = sigmoid(a[3 * H : 4 * H])
        c = f * c + i * g
        h = o * np.tanh(c)
        G[t, 0:H] = i
        G[t, H : 2 * H] = f
        G[t, 2 * H : 3 * H] = g
        G[t, 3 * H : 4 * H] = o
        H_out[t] = h
        C_out[t] = c
    return H_out, C_out, G


def lstm_core_backward(Wh, h0, c0, H_out, C_out, G, dH_ext):
    """Reverse sweep of the gate recurrence.

    ``dH_ext[t]`` is the externally supplied gradient flowing into ``h_t``
    (loss heads); the recurrent contribution is accumulated internally.
    Returns gradients for the pre-activation inputs ``Ax``, the recurrent
    weight, and the initial state.
    """
    T, H = dH_ext.shape
    dA = np.empty((T, 4 * H), dtype=np.float64)
    dWh = np.zeros_like(Wh)
    dh = np.zeros(H, dtype=np.float64)
    dc = np.zeros(H, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        dh = dh + dH_ext[t]
        i = G[t, 0:H]
        f = G[t, H : 2 * H]
        g = G[t, 2 * H : 3 * H]
        o = G[t, 3 * H : 4 * H]
        c_prev = C_out[t - 1] if t > 0 else c0
        h_prev = H_out[t - 1] if t > 0 else h0
        tc = np.tanh(C_out[t])
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dA[t, 0:H] = di * i * (1.0 - i)
        dA[t, H : 2 * H] = df * f * (1.0 - f)
        dA[t, 2 * H : 3 * H] = dg * (1.0 - g * g)
        dA[t, 3 * H : 4 * H] = do * o * (1.0 - o)
        row = dA[t]
        dWh += np.outer(row, h_prev)
        dh = Wh.T @ row
        dc = dc * f
    return dA, dWh, dh, dc
