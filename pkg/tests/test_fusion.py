import numpy as np
import pytest

from revdyn import fusion as F


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


# --- content injection ------------------------------------------------------

def test_fuse_bow_value_and_dim_check():
    rng = np.random.default_rng(0)
    E, V = 4, 6
    z = rng.normal(0, 1, E)
    counts = rng.integers(0, 3, V).astype(np.float64)
    W_s = rng.normal(0, 1, (E, V))
    np.testing.assert_allclose(F.fuse_bow(z, counts, W_s), z + W_s @ counts,
                               atol=1e-12)
    with pytest.raises(ValueError):
        F.fuse_bow(z, np.zeros(V + 1), W_s)


def test_fuse_bow_backward():
    rng = np.random.default_rng(1)
    E, V = 3, 5
    z = rng.normal(0, 1, E)
    counts = rng.integers(0, 3, V).astype(np.float64)
    W_s = rng.normal(0, 1, (E, V))
    W = rng.normal(0, 1, E)

    def loss():
        return float(W @ F.fuse_bow(z, counts, W_s))

    dz, grads = F.fuse_bow_backward(W, counts)
    _fd_check(loss, z, dz)
    _fd_check(loss, W_s, grads["W_s"])


def test_fuse_lm_value_and_backward():
    rng = np.random.default_rng(2)
    H, S, O = 3, 4, 3
    h = rng.normal(0, 1, H)
    sbar = rng.normal(0, 1, S)
    W = rng.normal(0, 1, (O, H + S))
    b = rng.normal(0, 1, O)
    got = F.fuse_lm(h, sbar, W, b)
    np.testing.assert_allclose(got, W @ np.concatenate([h, sbar]) + b,
                               atol=1e-12)

    probe = rng.normal(0, 1, O)

    def loss():
        return float(probe @ F.fuse_lm(h, sbar, W, b))

    dh, dsbar, grads = F.fuse_lm_backward(probe, h, sbar, W)
    _fd_check(loss, h, dh)
    _fd_check(loss, sbar, dsbar)
    _fd_check(loss, W, grads["W"])
    _fd_check(loss, b, grads["b"])


# --- factorization machine --------------------------------------------------

def test_fm_matches_naive_double_sum():
    rng = np.random.default_rng(3)
    for H in (1, 2, 5, 16):
        for _ in range(30):
            x = rng.normal(0, 1, H)
            w0 = rng.normal(0, 1, 1)
            w = rng.normal(0, 1, H)
            V = rng.normal(0, 0.5, (H, 4))
            fast, _ = F.fm_forward(x, w0, w, V)
            assert fast == pytest.approx(F.fm_naive(x, w0, w, V), abs=1e-9)


def test_fm_hand_example():
    # x=[1,2], V rows v1=[1,0], v2=[0.5,0]: pair term = (v1.v2) x1 x2 = 1
    x = np.array([1.0, 2.0])
    w0 = np.array([0.5])
    w = np.array([0.1, 0.2])
    V = np.array([[1.0, 0.0], [0.5, 0.0]])
    yhat, _ = F.fm_forward(x, w0, w, V)
    assert yhat == pytest.approx(0.5 + 0.1 + 0.4 + 1.0)


def test_fm_batch_matches_per_row():
    rng = np.random.default_rng(4)
    T, H, K = 7, 5, 3
    X = rng.normal(0, 1, (T, H))
    w0 = rng.normal(0, 1, 1)
    w = rng.normal(0, 1, H)
    V = rng.normal(0, 0.5, (H, K))
    y_batch, S = F.fm_forward_batch(X, w0, w, V)
    for t in range(T):
        y_row, s_row = F.fm_forward(X[t], w0, w, V)
        assert y_batch[t] == pytest.approx(y_row, abs=1e-12)
        np.testing.assert_allclose(S[t], s_row, atol=1e-12)


def test_fm_backward_matches_finite_differences():
    rng = np.random.default_rng(5)
    H, K = 4, 3
    x = rng.normal(0, 1, H)
    p = {"w0": rng.normal(0, 1, 1), "w": rng.normal(0, 1, H),
         "V": rng.normal(0, 0.5, (H, K))}

    def loss():
        yhat, _ = F.fm_forward(x, p["w0"], p["w"], p["V"])
        return yhat

    yhat, s = F.fm_forward(x, p["w0"], p["w"], p["V"])
    dx, grads = F.fm_backward(1.0, x, p["w"], p["V"], s)
    _fd_check(loss, x, dx)
    _fd_check(loss, p["w0"], grads["w0"])
    _fd_check(loss, p["w"], grads["w_linear"])
    _fd_check(loss, p["V"], grads["v_factors"])


def test_fm_batch_backward_matches_finite_differences():
    rng = np.random.default_rng(6)
    T, H, K = 5, 4, 3
    X = rng.normal(0, 1, (T, H))
    p = {"w0": rng.normal(0, 1, 1), "w": rng.normal(0, 1, H),
         "V": rng.normal(0, 0.5, (H, K))}
    probe = rng.normal(0, 1, T)

    def loss():
        yhat, _ = F.fm_forward_batch(X, p["w0"], p["w"], p["V"])
        return float(probe @ yhat)

    yhat, S = F.fm_forward_batch(X, p["w0"], p["w"], p["V"])
    dX, grads = F.fm_backward_batch(probe, X, p["w"], p["V"], S)
    _fd_check(loss, X, dX)
    _fd_check(loss, p["w0"], grads["w0"])
    _fd_check(loss, p["w"], grads["w_linear"])
    _fd_check(loss, p["V"], grads["v_factors"])


def test_fm_pair_term_symmetric_under_factor_rotation():
    # the pairwise term only sees V V^T, so an orthogonal right-rotation of V
    # leaves predictions unchanged
    rng = np.random.default_rng(7)
    H, K = 5, 3
    x = rng.normal(0, 1, H)
    w0, w = rng.normal(0, 1, 1), rng.normal(0, 1, H)
    V = rng.normal(0, 0.5, (H, K))
    Q, _ = np.linalg.qr(rng.normal(0, 1, (K, K)))
    a, _ = F.fm_forward(x, w0, w, V)
    b, _ = F.fm_forward(x, w0, w, V @ Q)
    assert a == pytest.approx(b, abs=1e-10)


# --- objective --------------------------------------------------------------

def test_total_loss_hand_example():
    # mse 0.25, arrival sum 2.0 * 0.1, content sum 10.0 * 0.01
    got = F.total_loss([0.25, 0.25], [0.5, 1.5], [4.0, 6.0],
                       lambda_arrival=0.1, lambda_content=0.01)
    assert got == pytest.approx(0.25 + 0.2 + 0.1)


def test_total_loss_normalized_nll():
    got = F.total_loss([1.0], [2.0, 4.0], [], lambda_arrival=0.5,
                       lambda_content=1.0, normalize_nll=True)
    assert got == pytest.approx(1.0 + 0.5 * 3.0)


def test_total_loss_empty_terms():
    assert F.total_loss([], [], [], 0.1, 0.1) == 0.0


def test_total_loss_negative_weights_rejected():
    with pytest.raises(ValueError):
        F.total_loss([1.0], [], [], -0.1, 0.0)
    with pytest.raises(ValueError):
        F.total_loss([1.0], [], [], 0.0, -0.1)
