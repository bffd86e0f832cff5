"""Review-text models conditioned on the reviewer and product states.

Two families share an interface: a bag-of-words softmax over the vocabulary,
and a word-level recurrent language model whose per-word hidden states are
compressed into a fixed summary by gated attention.  Both take the
concatenated user/item states ``g`` as context and report the negative
log-likelihood of the observed review.
"""

from __future__ import annotations

import numpy as np

from .corpus import BOS, RESERVED_TOKENS
from .dynamics import sigmoid, lstm_seq_forward, lstm_seq_backward


def log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    s = logits - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


# ---------------------------------------------------------------------------
# Bag-of-words model

def bow_nll(g, counts, R, b):
    """NLL of a count vector under softmax(R^T g + b), summed over tokens."""
    logits = g @ R + b
    logp = log_softmax(logits)
    n_tokens = counts.sum()
    nll = -float(counts @ logp)
    return nll, (logits, n_tokens)


def bow_nll_backward(dnll, g, counts, R, cache):
    """Gradients w.r.t. context g and the output layer."""
    logits, n_tokens = cache
    dlogits = dnll * (n_tokens * softmax(logits) - counts)
    dg = R @ dlogits
    grads = {"R": np.outer(g, dlogits), "b": dlogits}
    return dg, grads


# ---------------------------------------------------------------------------
# Gated attention pooling over per-word states

def attention_pool(S_words, M1, b1, M2, b2, q):
    """Weighted mean of word states; weights from a gated tanh scorer.

    S_words is [L, S] with L >= 1.  Returns (sbar [S], alpha [L], cache).
    """
    if S_words.shape[0] == 0:
        raise ValueError("cannot pool an empty sequence of word states")
    T1 = np.tanh(S_words @ M1.T + b1[None, :])
    Sg = sigmoid(S_words @ M2.T + b2[None, :])
    K = T1 * Sg
    e = K @ q
    # shift for stability; alpha is invariant to it
    ex = np.exp(e - e.max())
    alpha = ex / ex.sum()
    sbar = alpha @ S_words
    return sbar, alpha, (T1, Sg, K, alpha)


def attention_pool_backward(dsbar, S_words, M1, M2, q, cache):
    T1, Sg, K, alpha = cache
    dalpha = S_words @ dsbar
    dS = np.outer(alpha, dsbar)
    de = alpha * (dalpha - alpha @ dalpha)
    dK = np.outer(de, q)
    dT1 = dK * Sg
    dSg = dK * T1
    dA1 = dT1 * (1.0 - T1 * T1)
    dA2 = dSg * Sg * (1.0 - Sg)
    dS += dA1 @ M1 + dA2 @ M2
    grads = {
        "M1": dA1.T @ S_words,
        "b1": dA1.sum(axis=0),
        "M2": dA2.T @ S_words,
        "b2": dA2.sum(axis=0),
        "q": de @ K,
    }
    return dS, grads


# ---------------------------------------------------------------------------
# Recurrent language model over one review

def lm_forward(token_ids, g, table, W_x, W_h, b, W_out):
    """Score a review word by word, conditioned on context g.

    Inputs to the recurrence are [BOS, w_1, .., w_L], each concatenated with
    g; state j scores word j+1, so exactly L words are scored.  Per-word
    states are S[1:], i.e. the state after consuming each real word.

    Returns (nll, logps [L], S_words [L, S], cache).
    """
    L = len(token_ids)
    S_dim = W_h.shape[1]
    if L == 0:
        cache = None
        return 0.0, np.zeros(0), np.zeros((0, S_dim)), cache
    ids = np.empty(L + 1, dtype=np.int64)
    ids[0] = BOS
    ids[1:] = token_ids
    X = np.concatenate(
        [table[ids], np.broadcast_to(g, (L + 1, g.shape[0]))], axis=1
    )
    S_states, C_states, G = lstm_seq_forward(X, W_x, W_h, b)
    logits = S_states[:L] @ W_out.T
    logp_rows = log_softmax(logits)
    logps = logp_rows[np.arange(L), np.asarray(token_ids)]
    nll = -float(logps.sum())
    cache = (ids, X, S_states, C_states, G)
    return nll, logps, S_states[1:], cache


def lm_backward(dnll, dS_words, g, table, W_x, W_h, b, W_out, token_ids, cache,
                train_embeddings=False):
    """Backward for the combined objective a*nll + <dS_words, S[1:]>.

    Recomputes logits row by row instead of caching [L, V] probabilities.
    Returns (dg, grads, d_table_rows) where d_table_rows is None unless
    embedding training is on, else (ids, dE_rows) for scatter-add.
    """
    ids, X, S_states, C_states, G = cache
    L = len(token_ids)
    S_dim = W_h.shape[1]
    emb_dim = table.shape[1]
    dS_full = np.zeros((L + 1, S_dim))
    dS_full[1:] += dS_words
    dW_out = np.zeros_like(W_out)
    tok = np.asarray(token_ids)
    logits = S_states[:L] @ W_out.T
    P = softmax(logits)
    P[np.arange(L), tok] -= 1.0
    P *= dnll
    dW_out += P.T @ S_states[:L]
    dS_full[:L] += P @ W_out
    dX, lstm_grads = lstm_seq_backward(
        X, W_x, W_h, None, None, S_states, C_states, G, dS_full
    )
    dg = dX[:, emb_dim:].sum(axis=0)
    grads = {
        "W_x": lstm_grads["W_x"],
        "W_h": lstm_grads["W_h"],
        "b": lstm_grads["b"],
        "W_out": dW_out,
    }
    emb_update = None
    if train_embeddings:
        emb_update = (ids, dX[:, :emb_dim].copy())
    return dg, grads, emb_update


# ---------------------------------------------------------------------------
# Pretrained word vectors

def load_embeddings(path, vocab, dim, seed, scale=0.1):
    """Build the [V, dim] table from a whitespace text file of word vectors.

    Lines are ``token v1 .. v_dim``.  Vocabulary entries missing from the
    file (and the reserved control tokens) get small random vectors.
    """
    rng = np.random.default_rng(seed)
    table = rng.normal(0.0, scale, size=(vocab.size, dim))
    if path is None:
        return table
    found = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                continue
            idx = vocab.token_to_index.get(parts[0])
            if idx is None or idx < len(RESERVED_TOKENS):
                continue
            table[idx] = np.asarray(parts[1:], dtype=np.float64)
            found += 1
    if found == 0:
        raise ValueError(f"no vocabulary tokens found in embeddings file {path}")
    return table
