import numpy as np
import pytest

from revdyn import content as C
from revdyn.corpus import Vocabulary


def _fd_check(loss, tensor, grad, h=1e-6, tol=1e-5):
    flat = tensor.reshape(-1)
    gflat = np.asarray(grad).reshape(-1)
    for k in range(flat.size):
        keep = flat[k]
        flat[k] = keep + h
        up = loss()
        flat[k] = keep - h
        down = loss()
        flat[k] = keep
        assert gflat[k] == pytest.approx((up - down) / (2 * h), abs=tol)


def _lm_params(rng, V, E, S, G):
    return {
        "table": rng.normal(0, 0.5, (V, E)),
        "W_x": rng.normal(0, 0.4, (4 * S, E + G)),
        "W_h": rng.normal(0, 0.4, (4 * S, S)),
        "b": rng.normal(0, 0.4, 4 * S),
        "W_out": rng.normal(0, 0.4, (V, S)),
    }


# --- softmax ----------------------------------------------------------------

def test_softmax_normalizes_and_is_shift_invariant():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.normal(0, rng.uniform(0.5, 30), rng.integers(1, 40))
        p = C.softmax(x)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(C.softmax(x + 123.0), p, atol=1e-12)
        np.testing.assert_allclose(C.log_softmax(x), np.log(p), atol=1e-10)


def test_softmax_extreme_logits_stay_finite():
    p = C.softmax(np.array([1e4, 0.0, -1e4]))
    assert np.isfinite(p).all() and p.sum() == pytest.approx(1.0)


# --- bag-of-words likelihood ------------------------------------------------

def test_bow_nll_matches_naive_sum():
    rng = np.random.default_rng(1)
    G, V = 4, 9
    for _ in range(20):
        g = rng.normal(0, 1, G)
        R = rng.normal(0, 1, (G, V))
        b = rng.normal(0, 1, V)
        counts = rng.integers(0, 4, V).astype(np.float64)
        nll, _ = C.bow_nll(g, counts, R, b)
        logp = np.log(C.softmax(g @ R + b))
        naive = -sum(counts[w] * logp[w] for w in range(V))
        assert nll == pytest.approx(naive, abs=1e-10)


def test_bow_nll_empty_review_is_zero():
    g = np.ones(3)
    nll, _ = C.bow_nll(g, np.zeros(5), np.ones((3, 5)), np.zeros(5))
    assert nll == 0.0


def test_bow_backward_matches_finite_differences():
    rng = np.random.default_rng(2)
    G, V = 3, 6
    g = rng.normal(0, 1, G)
    R = rng.normal(0, 1, (G, V))
    b = rng.normal(0, 1, V)
    counts = rng.integers(0, 3, V).astype(np.float64)

    def loss():
        nll, _ = C.bow_nll(g, counts, R, b)
        return nll

    nll, cache = C.bow_nll(g, counts, R, b)
    dg, grads = C.bow_nll_backward(1.0, g, counts, R, cache)
    _fd_check(loss, g, dg)
    _fd_check(loss, R, grads["R"])
    _fd_check(loss, b, grads["b"])


# --- attention pooling ------------------------------------------------------

def test_attention_simplex_and_convex_hull():
    rng = np.random.default_rng(3)
    A, S = 3, 4
    M1, b1 = rng.normal(0, 1, (A, S)), rng.normal(0, 1, A)
    M2, b2 = rng.normal(0, 1, (A, S)), rng.normal(0, 1, A)
    q = rng.normal(0, 1, A)
    for _ in range(50):
        L = rng.integers(1, 9)
        S_words = rng.normal(0, 2, (L, S))
        sbar, alpha, _ = C.attention_pool(S_words, M1, b1, M2, b2, q)
        assert alpha.shape == (L,)
        assert np.all(alpha >= 0) and alpha.sum() == pytest.approx(1.0, abs=1e-12)
        # pooled vector lies inside the per-coordinate hull of the inputs
        assert np.all(sbar <= S_words.max(axis=0) + 1e-12)
        assert np.all(sbar >= S_words.min(axis=0) - 1e-12)


def test_attention_singleton_gets_full_weight():
    rng = np.random.default_rng(4)
    A, S = 3, 4
    S_words = rng.normal(0, 1, (1, S))
    sbar, alpha, _ = C.attention_pool(
        S_words, rng.normal(0, 1, (A, S)), rng.normal(0, 1, A),
        rng.normal(0, 1, (A, S)), rng.normal(0, 1, A), rng.normal(0, 1, A))
    assert alpha[0] == pytest.approx(1.0)
    np.testing.assert_allclose(sbar, S_words[0], atol=1e-12)


def test_attention_empty_sequence_raises():
    z = np.zeros
    with pytest.raises(ValueError):
        C.attention_pool(np.zeros((0, 4)), z((3, 4)), z(3), z((3, 4)), z(3), z(3))


def test_attention_score_shift_leaves_weights():
    # alpha depends on score differences only
    rng = np.random.default_rng(5)
    A, S, L = 3, 4, 5
    M1, b1 = rng.normal(0, 1, (A, S)), rng.normal(0, 1, A)
    M2, b2 = rng.normal(0, 1, (A, S)), rng.normal(0, 1, A)
    q = rng.normal(0, 1, A)
    S_words = rng.normal(0, 1, (L, S))
    _, alpha, cache = C.attention_pool(S_words, M1, b1, M2, b2, q)
    T1, Sg, K, _ = cache
    e = K @ q
    ref = np.exp(e - e.max())
    np.testing.assert_allclose(alpha, ref / ref.sum(), atol=1e-12)


def test_attention_backward_matches_finite_differences():
    rng = np.random.default_rng(6)
    A, S, L = 3, 4, 5
    p = {"M1": rng.normal(0, 1, (A, S)), "b1": rng.normal(0, 1, A),
         "M2": rng.normal(0, 1, (A, S)), "b2": rng.normal(0, 1, A),
         "q": rng.normal(0, 1, A)}
    S_words = rng.normal(0, 1, (L, S))
    W = rng.normal(0, 1, S)

    def loss():
        sbar, _, _ = C.attention_pool(S_words, p["M1"], p["b1"], p["M2"],
                                      p["b2"], p["q"])
        return float(W @ sbar)

    sbar, alpha, cache = C.attention_pool(S_words, p["M1"], p["b1"], p["M2"],
                                          p["b2"], p["q"])
    dS, grads = C.attention_pool_backward(W, S_words, p["M1"], p["M2"], p["q"],
                                          cache)
    for name in p:
        _fd_check(loss, p[name], grads[name])
    _fd_check(loss, S_words, dS)


# --- recurrent language model ----------------------------------------------

def test_lm_scores_every_word_once():
    rng = np.random.default_rng(7)
    V, E, S, G = 10, 3, 4, 2
    p = _lm_params(rng, V, E, S, G)
    g = rng.normal(0, 1, G)
    token_ids = [5, 9, 4]
    nll, logps, S_words, _ = C.lm_forward(token_ids, g, p["table"], p["W_x"],
                                          p["W_h"], p["b"], p["W_out"])
    assert logps.shape == (3,)
    assert S_words.shape == (3, S)
    assert nll == pytest.approx(-logps.sum())
    assert np.all(logps < 0)


def test_lm_empty_review():
    rng = np.random.default_rng(8)
    p = _lm_params(rng, 6, 3, 4, 2)
    nll, logps, S_words, cache = C.lm_forward([], np.ones(2), p["table"],
                                              p["W_x"], p["W_h"], p["b"],
                                              p["W_out"])
    assert nll == 0.0 and logps.shape == (0,) and S_words.shape == (0, 4)
    assert cache is None


def test_lm_zero_output_layer_gives_uniform_scores():
    # W_out = 0 makes every word equally likely: nll = L * log V
    rng = np.random.default_rng(9)
    V, E, S, G = 7, 3, 4, 2
    p = _lm_params(rng, V, E, S, G)
    p["W_out"] = np.zeros((V, S))
    token_ids = [4, 5, 6, 4]
    nll, _, _, _ = C.lm_forward(token_ids, np.ones(G), p["table"], p["W_x"],
                                p["W_h"], p["b"], p["W_out"])
    assert nll == pytest.approx(len(token_ids) * np.log(V))


def test_lm_word_state_causal_within_review():
    # S_words[j] depends only on tokens up to j: editing a later token leaves
    # earlier per-word states bit-identical
    rng = np.random.default_rng(10)
    V, E, S, G = 10, 3, 4, 2
    p = _lm_params(rng, V, E, S, G)
    g = rng.normal(0, 1, G)

    def states(ids):
        _, _, S_words, _ = C.lm_forward(ids, g, p["table"], p["W_x"], p["W_h"],
                                        p["b"], p["W_out"])
        return S_words

    a = states([4, 5, 6, 7])
    b = states([4, 5, 6, 9])
    assert a[:3].tobytes() == b[:3].tobytes()
    assert a[3].tobytes() != b[3].tobytes()


def test_lm_backward_matches_finite_differences():
    rng = np.random.default_rng(11)
    V, E, S, G = 8, 3, 4, 2
    p = _lm_params(rng, V, E, S, G)
    g = rng.normal(0, 1, G)
    token_ids = [4, 6, 5]
    dS_words = rng.normal(0, 1, (3, S))
    a = 0.7

    def loss():
        nll, _, S_words, _ = C.lm_forward(token_ids, g, p["table"], p["W_x"],
                                          p["W_h"], p["b"], p["W_out"])
        return a * nll + float((dS_words * S_words).sum())

    nll, _, S_words, cache = C.lm_forward(token_ids, g, p["table"], p["W_x"],
                                          p["W_h"], p["b"], p["W_out"])
    dg, grads, emb = C.lm_backward(a, dS_words, g, p["table"], p["W_x"],
                                   p["W_h"], p["b"], p["W_out"], token_ids,
                                   cache, train_embeddings=True)
    _fd_check(loss, g, dg)
    for name in ("W_x", "W_h", "b", "W_out"):
        _fd_check(loss, p[name], grads[name])
    # embedding rows: scatter-add the per-position updates, then compare
    ids, dE_rows = emb
    dtable = np.zeros_like(p["table"])
    np.add.at(dtable, ids, dE_rows)
    _fd_check(loss, p["table"], dtable)


def test_lm_backward_without_embedding_training():
    rng = np.random.default_rng(12)
    p = _lm_params(rng, 8, 3, 4, 2)
    g = rng.normal(0, 1, 2)
    token_ids = [4, 5]
    _, _, S_words, cache = C.lm_forward(token_ids, g, p["table"], p["W_x"],
                                        p["W_h"], p["b"], p["W_out"])
    _, _, emb = C.lm_backward(1.0, np.zeros_like(S_words), g, p["table"],
                              p["W_x"], p["W_h"], p["b"], p["W_out"],
                              token_ids, cache)
    assert emb is None


# --- pretrained embeddings --------------------------------------------------

def _vocab():
    return Vocabulary({"<pad>": 0, "<unk>": 1, "<bos>": 2, "<eos>": 3,
                       "good": 4, "bad": 5})


def test_load_embeddings_no_path_is_random_init():
    t1 = C.load_embeddings(None, _vocab(), 3, seed=0)
    t2 = C.load_embeddings(None, _vocab(), 3, seed=0)
    t3 = C.load_embeddings(None, _vocab(), 3, seed=1)
    assert t1.shape == (6, 3)
    np.testing.assert_array_equal(t1, t2)
    assert not np.array_equal(t1, t3)


def test_load_embeddings_reads_matching_rows(tmp_path):
    p = tmp_path / "vecs.txt"
    p.write_text(
        "good 1.0 2.0 3.0\n"
        "unrelated 9.0 9.0 9.0\n"
        "bad 0.5 0.25 0.125\n"
        "<bos> 7.0 7.0 7.0\n"        # reserved token line is ignored
        "short 1.0\n"                # wrong arity is skipped
    )
    t = C.load_embeddings(p, _vocab(), 3, seed=0)
    np.testing.assert_array_equal(t[4], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(t[5], [0.5, 0.25, 0.125])
    baseline = C.load_embeddings(None, _vocab(), 3, seed=0)
    np.testing.assert_array_equal(t[2], baseline[2])   # <bos> untouched


def test_load_embeddings_no_overlap_is_error(tmp_path):
    p = tmp_path / "vecs.txt"
    p.write_text("zzz 1.0 2.0 3.0\n")
    with pytest.raises(ValueError):
        C.load_embeddings(p, _vocab(), 3, seed=0)
