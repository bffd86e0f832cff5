"""Combining temporal states with review-content signals, and the rating head.

The bag-of-words variant injects a count vector into the event embedding; the
language-model variants mix the pooled word-state summary into the entity
state through a learned linear map.  Ratings come from a second-order
factorization machine over the concatenated (user, item) representation.
"""

from __future__ import annotations

import numpy as np


# ---------------------------------------------------------------------------
# Content injection

def fuse_bow(z, counts, W_s):
    """Shift an event embedding by a linear image of the review counts."""
    if counts.shape[0] != W_s.shape[1]:
        raise ValueError(
            f"count dim {counts.shape[0]} != fusion columns {W_s.shape[1]}"
        )
    return z + W_s @ counts


def fuse_bow_backward(dz_tilde, counts):
    """d/dz is the identity; returns the fusion-matrix gradient."""
    return dz_tilde, {"W_s": np.outer(dz_tilde, counts)}


def fuse_lm(h, sbar, W, b):
    """Affine mix of entity state and content summary: W [h; sbar] + b."""
    return W[:, : h.shape[0]] @ h + W[:, h.shape[0]:] @ sbar + b


def fuse_lm_backward(dh_tilde, h, sbar, W):
    H = h.shape[0]
    dh = W[:, :H].T @ dh_tilde
    dsbar = W[:, H:].T @ dh_tilde
    grads = {
        "W": np.outer(dh_tilde, np.concatenate([h, sbar])),
        "b": dh_tilde,
    }
    return dh, dsbar, grads


# ---------------------------------------------------------------------------
# Factorization machine

def fm_forward(x, w0, w, V):
    """Second-order FM in the O(H K) form; returns (yhat, cache)."""
    s = V.T @ x
    sq = (V * V).T @ (x * x)
    yhat = float(w0[0] + w @ x + 0.5 * (s @ s - sq.sum()))
    return yhat, s


def fm_backward(dy, x, w, V, s):
    dx = dy * (w + V @ s - (V * V).sum(axis=1) * x)
    grads = {
        "w0": np.asarray([dy]),
        "w_linear": dy * x,
        "v_factors": dy * (np.outer(x, s) - V * (x * x)[:, None]),
    }
    return dx, grads


def fm_forward_batch(X, w0, w, V):
    """FM over rows of X [T, n]; returns (yhat [T], S [T, K])."""
    S = X @ V
    yhat = w0[0] + X @ w + 0.5 * ((S * S).sum(axis=1) - (X * X) @ (V * V).sum(axis=1))
    return yhat, S


def fm_backward_batch(dy, X, w, V, S):
    dyc = dy[:, None]
    dX = dyc * w[None, :] + (dyc * S) @ V.T - (dyc * X) * (V * V).sum(axis=1)[None, :]
    grads = {
        "w0": np.asarray([dy.sum()]),
        "w_linear": X.T @ dy,
        "v_factors": X.T @ (dyc * S) - V * ((dyc * (X * X)).sum(axis=0))[:, None],
    }
    return dX, grads


def fm_naive(x, w0, w, V):
    """Direct pairwise double sum; quadratic in the input dim.  Test oracle."""
    n = x.shape[0]
    acc = float(w0[0]) + float(w @ x)
    for i in range(n):
        for j in range(i + 1, n):
            acc += float(V[i] @ V[j]) * x[i] * x[j]
    return acc


# ---------------------------------------------------------------------------
# Objective

def total_loss(sq_errors, arrival_nlls, content_nlls,
               lambda_arrival, lambda_content, normalize_nll=False):
    """Scalar objective: mean squared error plus weighted likelihood terms.

    The likelihood terms are sums over events; with ``normalize_nll`` they
    become per-event means so the weights stay comparable across corpus
    sizes.  Weights must be nonnegative.
    """
    if lambda_arrival < 0 or lambda_content < 0:
        raise ValueError("loss weights must be nonnegative")
    sq_errors = np.asarray(sq_errors, dtype=np.float64)
    mse = float(sq_errors.mean()) if sq_errors.size else 0.0

    def reduce(values):
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return 0.0
        return float(values.mean()) if normalize_nll else float(values.sum())

    return (
        mse
        + lambda_arrival * reduce(arrival_nlls)
        + lambda_content * reduce(content_nlls)
    )
