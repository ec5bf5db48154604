"""Autodiff engine checks: finite-difference oracles for every layer
type, spectral-norm behaviour against a full SVD, gradient-penalty hand
values, and optimizer contracts."""

import numpy as np
import pytest

from auvtrack import nn
from auvtrack.nn.tensor import Tensor


def fd_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        hi = f(x)
        flat[k] = orig - h
        lo = f(x)
        flat[k] = orig
        gf[k] = (hi - lo) / (2.0 * h)
    return g


def check_param_grads(build_loss, params: list, rtol: float = 1e-4):
    """Compare tape gradients of `build_loss()` against FD on each param."""
    loss = build_loss()
    nn.backward(loss)
    for p in params:
        analytic = p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
        p.grad = None

        def f(arr, p=p):
            old = p.data
            p.data = arr
            val = build_loss().item()
            p.data = old
            return val

        numeric = fd_gradient(f, p.data.copy())
        denom = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-8)
        assert np.abs(analytic - numeric).max() / denom < rtol


# ---------------------------------------------------------------------------
# backward contract


def test_square_gradient():
    x = nn.param(3.0)
    y = x * x
    nn.backward(y)
    assert x.grad == pytest.approx(6.0)


def test_constant_loss_zero_grads():
    x = nn.param(np.array([1.0, 2.0]))
    loss = (x * 0.0).sum()
    nn.backward(loss)
    assert np.all(x.grad == 0.0)


def test_non_scalar_loss_rejected():
    x = nn.param(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        nn.backward(x * x)


def test_double_backward_rejected():
    x = nn.param(2.0)
    y = x * x
    nn.backward(y)
    with pytest.raises(RuntimeError):
        nn.backward(y)


def test_broadcast_and_matmul_grads():
    rng = np.random.default_rng(0)
    w = nn.param(rng.normal(size=(4, 3)))
    b = nn.param(rng.normal(size=3))
    x = nn.tensor(rng.normal(size=(5, 4)))
    check_param_grads(lambda: ((x @ w + b) ** 2).sum(), [w, b])


# ---------------------------------------------------------------------------
# layer-by-layer finite-difference agreement (rel. err < 1e-4)


@pytest.mark.parametrize("act", ["relu", "tanh"])
def test_mlp_gradients(act):
    rng = np.random.default_rng(1)
    mlp = nn.MLP([6, 8, 8, 1], rng, act=act)
    x = nn.tensor(rng.normal(size=(7, 6)) + 0.1)
    params = [p for _, p in mlp.parameters()]
    check_param_grads(lambda: (mlp(x) ** 2).mean(), params)


def test_layernorm_gradients():
    rng = np.random.default_rng(2)
    ln = nn.LayerNorm(5)
    ln.gamma.data = rng.normal(1.0, 0.1, size=5)
    ln.beta.data = rng.normal(0.0, 0.1, size=5)
    x = nn.param(rng.normal(size=(4, 5)))
    check_param_grads(lambda: (ln(x) ** 3).sum(), [x, ln.gamma, ln.beta])


def test_attention_gradients():
    rng = np.random.default_rng(3)
    att = nn.CausalSelfAttention(8, 2, rng)
    mask = nn.causal_mask_bias(5)
    x = nn.tensor(rng.normal(size=(2, 5, 8)))
    params = [p for _, p in att.parameters()]
    check_param_grads(lambda: (att(x, mask) ** 2).mean(), params)


def test_decoder_block_gradients():
    rng = np.random.default_rng(4)
    block = nn.DecoderBlock(8, 1, rng, mlp_ratio=2)
    mask = nn.causal_mask_bias(4)
    x = nn.tensor(rng.normal(size=(2, 4, 8)))
    params = [p for _, p in block.parameters()]
    check_param_grads(lambda: (block(x, mask) ** 2).mean(), params)


def test_log_sigmoid_head_gradients():
    rng = np.random.default_rng(5)
    mlp = nn.MLP([4, 6, 1], rng, act="tanh")
    x = nn.tensor(rng.normal(size=(6, 4)))
    params = [p for _, p in mlp.parameters()]

    def loss():
        return -(mlp(x).sigmoid().log()).mean()

    check_param_grads(loss, params)


def test_softmax_and_embedding_gradients():
    rng = np.random.default_rng(6)
    table = nn.param(rng.normal(size=(10, 4)))
    idx = np.array([1, 3, 3, 7])

    def loss():
        emb = nn.embedding(table, idx)
        return (emb.softmax(axis=-1) * nn.tensor(rng2)).sum()

    rng2 = np.random.default_rng(7).normal(size=(4, 4))
    check_param_grads(loss, [table])


def test_spectral_linear_gradients():
    # the analytic gradient treats the power-iteration vectors as
    # constants, which is exact only once u has converged
    rng = np.random.default_rng(8)
    lin = nn.SpectralLinear(4, 3, rng)
    _, lin.u, _ = nn.power_iteration(lin.W.data, lin.u, steps=200)
    u_frozen = lin.u.copy()
    x = nn.tensor(rng.normal(size=(5, 4)))

    def loss():
        lin.u = u_frozen.copy()  # pin the iteration state across FD probes
        return (lin(x) ** 2).sum()

    check_param_grads(loss, [lin.W, lin.b])


# ---------------------------------------------------------------------------
# attention semantics


def test_single_token_attention_passthrough():
    rng = np.random.default_rng(9)
    att = nn.CausalSelfAttention(6, 1, rng)
    att.wo.W.data = np.eye(6)
    att.wo.b.data = np.zeros(6)
    x = nn.tensor(rng.normal(size=(1, 1, 6)))
    out = att(x, nn.causal_mask_bias(1))
    v = att.wv(x)
    assert np.allclose(out.data, v.data, atol=1e-12)


def test_causal_mask_blocks_future():
    rng = np.random.default_rng(10)
    att = nn.CausalSelfAttention(8, 1, rng)
    mask = nn.causal_mask_bias(6)
    x = rng.normal(size=(1, 6, 8))
    base = att(nn.tensor(x), mask).data.copy()
    x_pert = x.copy()
    x_pert[0, 4:] += rng.normal(size=(2, 8))
    pert = att(nn.tensor(x_pert), mask).data
    assert np.allclose(base[0, :4], pert[0, :4], atol=1e-12)
    assert not np.allclose(base[0, 4:], pert[0, 4:])


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(11)
    scores = nn.tensor(rng.normal(size=(3, 7, 7)) * 5.0)
    rows = scores.softmax(axis=-1).data.sum(axis=-1)
    assert np.abs(rows - 1.0).max() < 1e-12


# ---------------------------------------------------------------------------
# spectral normalization vs SVD oracle


def test_spectral_normalize_scalar_matrix():
    w, _ = nn.spectral_normalize(3.0 * np.eye(4), steps=30)
    assert np.allclose(w, np.eye(4), atol=1e-8)


def test_spectral_normalize_zero_matrix_unchanged():
    w, _ = nn.spectral_normalize(np.zeros((3, 3)))
    assert np.all(w == 0.0)


def test_spectral_normalize_converges_to_unit_norm():
    rng = np.random.default_rng(12)
    w = rng.normal(size=(64, 64))
    u = None
    for _ in range(50):
        wn, u = nn.spectral_normalize(w, u, steps=1)
    top = np.linalg.svd(wn, compute_uv=False)[0]
    assert 0.95 <= top <= 1.05


def test_spectral_normalize_idempotent():
    rng = np.random.default_rng(13)
    w = rng.normal(size=(16, 16))
    wn, u = nn.spectral_normalize(w, None, steps=100)
    wnn, _ = nn.spectral_normalize(wn, u, steps=100)
    assert np.abs(wnn - wn).max() < 1e-6


# ---------------------------------------------------------------------------
# gradient penalty


class _LinearNet:
    """D(x) = w^T x as a bare input-gradient test double."""

    def __init__(self, w):
        self.w = nn.param(np.asarray(w, dtype=np.float64)[:, None])

    def forward_with_input_gradient(self, x):
        out = x @ self.w
        g = nn.tensor(np.ones((x.shape[0], 1))) @ self.w.transpose_last()
        return out, g


def test_gradient_penalty_unit_norm_linear_is_zero():
    w = np.array([0.6, 0.8])  # unit norm
    net = _LinearNet(w)
    rng = np.random.default_rng(14)
    gp = nn.gradient_penalty(net, rng.normal(size=(8, 2)), rng.normal(size=(8, 2)),
                             coeff=1.0, rng=rng)
    assert gp.item() == 0.0


def test_gradient_penalty_double_norm_linear():
    w = 2.0 * np.array([0.6, 0.8])
    net = _LinearNet(w)
    rng = np.random.default_rng(15)
    gp = nn.gradient_penalty(net, rng.normal(size=(8, 2)), rng.normal(size=(8, 2)),
                             coeff=3.0, rng=rng)
    assert gp.item() == pytest.approx(3.0 * 1.0, abs=1e-12)


def test_gradient_penalty_nonnegative_and_differentiable():
    rng = np.random.default_rng(16)
    mlp = nn.MLP([3, 8, 1], rng, act="tanh")
    gp = nn.gradient_penalty(mlp, rng.normal(size=(10, 3)), rng.normal(size=(10, 3)),
                             coeff=1.0, rng=rng)
    assert gp.item() >= 0.0
    nn.backward(gp)
    assert any(p.grad is not None and np.abs(p.grad).max() > 0
               for _, p in mlp.parameters())


def test_gradient_penalty_matches_fd_through_weights():
    rng = np.random.default_rng(17)
    mlp = nn.MLP([3, 6, 1], rng, act="tanh")
    xp = rng.normal(size=(5, 3))
    xe = rng.normal(size=(5, 3))
    params = [p for _, p in mlp.parameters()]
    check_param_grads(lambda: nn.gradient_penalty(mlp, xp, xe, 1.0, None), params)


def test_batch_shape_mismatch_rejected():
    net = _LinearNet([1.0, 0.0])
    with pytest.raises(ValueError):
        nn.gradient_penalty(net, np.zeros((4, 2)), np.zeros((5, 2)))


# ---------------------------------------------------------------------------
# optimizer


def test_adam_zero_grad_no_move():
    p = nn.param(np.array([1.0, -2.0]))
    opt = nn.Adam([("p", p)], lr=0.1)
    p.grad = np.zeros(2)
    opt.step()
    assert np.all(p.data == np.array([1.0, -2.0]))


def test_adam_constant_grad_limit_is_signed_lr():
    p = nn.param(np.zeros(3))
    opt = nn.Adam([("p", p)], lr=0.01)
    g = np.array([0.5, -2.0, 3.0])
    prev = p.data.copy()
    for _ in range(600):
        prev = p.data.copy()
        p.grad = g.copy()
        opt.step()
    step = p.data - prev
    assert np.allclose(step, -0.01 * np.sign(g), rtol=1e-3)


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(18)
        p = nn.param(rng.normal(size=4))
        opt = nn.Adam([("p", p)], lr=0.02)
        for i in range(20):
            p.grad = np.sin(p.data + i)
            opt.step()
        return p.data.copy()

    assert np.array_equal(run(), run())


def test_adam_nan_grad_faults_with_name():
    p = nn.param(np.zeros(2))
    opt = nn.Adam([("theta", p)], lr=0.1)
    p.grad = np.array([np.nan, 0.0])
    with pytest.raises(FloatingPointError, match="theta"):
        opt.step()


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(19)
    tensors = {"a.W": rng.normal(size=(3, 4)), "b": rng.normal(size=7),
               "scalar": np.array(2.5)}
    path = tmp_path / "model.ckpt"
    nn.save_checkpoint(path, tensors)
    loaded = nn.load_checkpoint(path)
    assert set(loaded) == set(tensors)
    for k in tensors:
        assert np.array_equal(loaded[k], tensors[k])


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        nn.load_checkpoint(path)
