"""Temporal model of review sequences.

Each event (creation day, inter-review gap, hashed rating vector) is embedded
linearly, folded into a per-entity LSTM state, and the state drives a strictly
positive review-arrival intensity.  Inter-review gaps are modeled as
exponential with that state-dependent rate; the per-event negative
log-likelihood of the next gap is ``lam * delta - log(lam)``.

Users and items carry two fully independent parameter sets of this model.
All functions come in forward/backward pairs; gradients are exact.
"""

from __future__ import annotations

import numpy as np

from . import backend


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# Event embedding: z = W_tau * tau + W_delta * delta + W_y @ y + b

def embed_events(tau, delta, y, W_tau, W_delta, W_y, b):
    """Vectorized over a sequence: tau [T], delta [T], y [T, D] -> Z [T, E]."""
    if y.shape[1] != W_y.shape[1]:
        raise ValueError(
            f"hashed rating dim {y.shape[1]} != W_y columns {W_y.shape[1]}"
        )
    return (
        np.outer(tau, W_tau) + np.outer(delta, W_delta) + y @ W_y.T + b[None, :]
    )


def embed_events_backward(dZ, tau, delta, y):
    """Gradients of the linear embedding w.r.t. its four parameter blocks."""
    return {
        "W_tau": tau @ dZ,
        "W_delta": delta @ dZ,
        "W_y": dZ.T @ y,
        "b": dZ.sum(axis=0),
    }


def embed_event(tau: float, delta: float, y: np.ndarray, params: dict) -> np.ndarray:
    """Single-event convenience wrapper."""
    z = embed_events(
        np.asarray([tau], dtype=np.float64),
        np.asarray([delta], dtype=np.float64),
        np.asarray(y, dtype=np.float64)[None, :],
        params["W_tau"], params["W_delta"], params["W_y"], params["b"],
    )
    return z[0]


# ---------------------------------------------------------------------------
# LSTM over an event sequence (kernels do the serial recurrence)

def lstm_seq_forward(X, W_x, W_h, b, h0=None, c0=None):
    """States for a whole sequence; returns (H_states, C_states, gates)."""
    T = X.shape[0]
    H = W_h.shape[1]
    if X.shape[1] != W_x.shape[1]:
        raise ValueError(f"input dim {X.shape[1]} != W_x columns {W_x.shape[1]}")
    h0 = np.zeros(H) if h0 is None else np.asarray(h0, dtype=np.float64)
    c0 = np.zeros(H) if c0 is None else np.asarray(c0, dtype=np.float64)
    Ax = X @ W_x.T + b[None, :]
    if T == 0:
        empty = np.zeros((0, H))
        return empty, empty.copy(), np.zeros((0, 4 * H))
    return backend.lstm_core_forward(Ax, W_h, h0, c0)


def lstm_seq_backward(X, W_x, W_h, h0, c0, H_states, C_states, G, dH_ext, window=None):
    """Backward through the recurrence, optionally truncated.

    With ``window = w`` the sequence is treated as independent chunks of w
    steps: gradient does not flow across chunk boundaries (classic truncated
    backpropagation through time).  Forward states are exact either way.
    """
    T, H = dH_ext.shape
    if T == 0:
        return np.zeros_like(X), {
            "W_x": np.zeros_like(W_x),
            "W_h": np.zeros_like(W_h),
            "b": np.zeros(4 * H),
        }
    h0 = np.zeros(H) if h0 is None else h0
    c0 = np.zeros(H) if c0 is None else c0
    window = T if not window else int(window)
    dA = np.empty((T, 4 * H))
    dWh = np.zeros_like(W_h)
    starts = list(range(0, T, window))
    for a in starts:
        b_end = min(a + window, T)
        ch0 = h0 if a == 0 else H_states[a - 1]
        cc0 = c0 if a == 0 else C_states[a - 1]
        dA_c, dWh_c, _, _ = backend.lstm_core_backward(
            W_h, ch0, cc0,
            np.ascontiguousarray(H_states[a:b_end]),
            np.ascontiguousarray(C_states[a:b_end]),
            np.ascontiguousarray(G[a:b_end]),
            np.ascontiguousarray(dH_ext[a:b_end]),
        )
        dA[a:b_end] = dA_c
        dWh += dWh_c
    dX = dA @ W_x
    grads = {"W_x": dA.T @ X, "W_h": dWh, "b": dA.sum(axis=0)}
    return dX, grads


def step(z: np.ndarray, state: tuple[np.ndarray, np.ndarray], params: dict):
    """One recurrent update: (h, c) -> (h', c').  Outputs satisfy |h_i| <= 1."""
    h, c = state
    H_states, C_states, _ = lstm_seq_forward(
        np.asarray(z, dtype=np.float64)[None, :],
        params["W_x"], params["W_h"], params["b"], h0=h, c0=c,
    )
    return H_states[0], C_states[0]


# ---------------------------------------------------------------------------
# Arrival intensity head: one tanh hidden layer, softplus output

def intensity_forward(H_states, W1, b1, w2, b2):
    """Strictly positive rates for a block of states [T, H] -> (lam [T], cache)."""
    U = np.tanh(H_states @ W1.T + b1[None, :])
    a2 = U @ w2 + b2[0]
    lam = softplus(a2)
    return lam, (U, a2)


def intensity_backward(dlam, H_states, W1, w2, cache):
    U, a2 = cache
    da2 = dlam * sigmoid(a2)
    dU = np.outer(da2, w2)
    dA1 = dU * (1.0 - U * U)
    dH = dA1 @ W1
    grads = {
        "W1": dA1.T @ H_states,
        "b1": dA1.sum(axis=0),
        "w2": da2 @ U,
        "b2": np.asarray([da2.sum()]),
    }
    return dH, grads


def intensity(state: np.ndarray, params: dict) -> float:
    """Rate for a single state vector."""
    lam, _ = intensity_forward(
        np.asarray(state, dtype=np.float64)[None, :],
        params["W1"], params["b1"], params["w2"], params["b2"],
    )
    return float(lam[0])


def nll_exponential(lam, delta_next):
    """Per-event negative log-likelihood of the next gap: lam*delta - log(lam)."""
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam <= 0):
        raise ValueError("exponential rate must be positive")
    if np.any(np.asarray(delta_next) < 0):
        raise ValueError("inter-review gap must be nonnegative")
    return lam * delta_next - np.log(lam)


def nll_exponential_grad(lam, delta_next):
    """d(nll)/d(lam) = delta - 1/lam."""
    lam = np.asarray(lam, dtype=np.float64)
    return np.asarray(delta_next, dtype=np.float64) - 1.0 / lam


def predict_next_time(state: np.ndarray, params: dict) -> float:
    """Expected gap to the next review: the exponential mean 1/lam."""
    return 1.0 / intensity(state, params)
