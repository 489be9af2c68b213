"""Finite-difference validation of every autodiff op used by the networks."""

import numpy as np
import pytest

from viewskill.nn import autodiff as ad
from viewskill.nn.autodiff import Tensor
from viewskill.nn import layers
from viewskill.nn.optim import Adam


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + h
        fp = f()
        x[i] = orig - h
        fm = f()
        x[i] = orig
        g[i] = (fp - fm) / (2 * h)
        it.iternext()
    return g


def check_grad(build, shapes, seed=0, atol=1e-7, rtol=1e-5):
    """build(tensors) -> scalar Tensor; compares autodiff grad to FD."""
    rng = np.random.default_rng(seed)
    tensors = [Tensor(rng.normal(size=s), requires_grad=True) for s in shapes]
    out = build(tensors)
    out.backward()
    for t in tensors:
        fd = numeric_grad(lambda: build(tensors).item(), t.data)
        assert t.grad is not None
        np.testing.assert_allclose(t.grad, fd, atol=atol, rtol=rtol)


def test_add_mul_broadcast():
    check_grad(lambda ts: ad.tsum(ad.mul(ad.add(ts[0], ts[1]), ts[2])),
               [(3, 4), (4,), (3, 1)])


def test_power_div():
    check_grad(lambda ts: ad.tsum(ts[0] / (ad.power(ts[1], 2.0) + 2.0)),
               [(5,), (5,)])


def test_exp_log_sqrt():
    check_grad(lambda ts: ad.tsum(ad.log(ad.exp(ts[0]) + 1.0))
               + ad.tsum(ad.sqrt(ad.exp(ts[1]))),
               [(4, 2), (3,)])


def test_tanh_sigmoid_relu_abs():
    check_grad(
        lambda ts: ad.tsum(ad.tanh(ts[0])) + ad.tsum(ad.sigmoid(ts[1]))
        + ad.tsum(ad.relu(ts[2])) + ad.tsum(ad.absolute(ts[3])),
        [(6,), (6,), (6,), (6,)],
        seed=3,
    )


def test_clip_passthrough_region():
    x = Tensor(np.array([-2.0, -0.5, 0.5, 2.0]), requires_grad=True)
    out = ad.tsum(ad.mul(ad.clip(x, -1.0, 1.0), 3.0))
    out.backward()
    assert np.allclose(x.grad, [0.0, 3.0, 3.0, 0.0])


def test_sum_mean_axes():
    check_grad(lambda ts: ad.tsum(ad.tmean(ts[0], axis=1) * ts[1]),
               [(3, 5), (3,)])
    check_grad(lambda ts: ad.tsum(ad.tsum(ts[0], axis=0, keepdims=True) * ts[1]),
               [(3, 5), (1, 5)])


def test_reshape_transpose_getitem_concat_stack():
    def build(ts):
        a = ad.reshape(ts[0], (6, 2))
        b = ad.transpose(ts[1], (1, 0))
        c = ad.concat([a, b], axis=0)
        d = ad.stack([c[0], c[1]], axis=0)
        return ad.tsum(c) + ad.tsum(ad.mul(d, 2.0))

    check_grad(build, [(3, 4), (2, 6)])


def test_matmul_batched():
    check_grad(lambda ts: ad.tsum(ad.matmul(ts[0], ts[1])),
               [(2, 3, 4), (2, 4, 5)])
    check_grad(lambda ts: ad.tsum(ad.matmul(ts[0], ts[1])),
               [(3, 4), (4, 2)])


def test_softmax_logsumexp_logsoftmax():
    check_grad(lambda ts: ad.tsum(ad.mul(ad.softmax(ts[0], axis=-1), ts[1])),
               [(3, 4), (3, 4)])
    check_grad(lambda ts: ad.tsum(ad.logsumexp(ts[0], axis=1)), [(3, 4)])
    check_grad(lambda ts: ad.tsum(ad.mul(ad.log_softmax(ts[0]), ts[1])),
               [(2, 5), (2, 5)])


def test_embedding_gather():
    idx = np.array([0, 2, 2, 1])

    def build(ts):
        rows = ad.embedding(ts[0], idx)
        return ad.tsum(ad.mul(rows, rows))

    check_grad(build, [(3, 4)])


def test_conv2d_grad():
    def build(ts):
        out = ad.conv2d(ts[0], ts[1], ts[2], stride=2, pad=1)
        return ad.tsum(ad.mul(out, out))

    check_grad(build, [(2, 3, 6, 6), (4, 3, 3, 3), (4,)], atol=1e-6)


def test_conv2d_matches_direct_computation():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(1, 2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    out = ad.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=1, pad=1).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    expect = np.zeros((1, 3, 5, 5))
    for f in range(3):
        for i in range(5):
            for j in range(5):
                expect[0, f, i, j] = np.sum(xp[0, :, i:i + 3, j:j + 3] * w[f]) + b[f]
    np.testing.assert_allclose(out, expect, atol=1e-12)


def test_upsample_nearest2():
    x = Tensor(np.arange(8.0).reshape(1, 2, 2, 2), requires_grad=True)
    up = ad.upsample_nearest2(x)
    assert up.data.shape == (1, 2, 4, 4)
    assert np.all(up.data[0, 0, :2, :2] == x.data[0, 0, 0, 0])
    ad.tsum(up).backward()
    assert np.allclose(x.grad, 4.0)


def test_layernorm_attention_transformer_grads():
    rng = np.random.default_rng(11)
    params = {}
    layers.init_transformer_layer(params, "blk", d_model=8, d_hidden=16, rng=rng)
    x = Tensor(rng.normal(size=(2, 3, 8)), requires_grad=True)

    def run():
        return ad.tsum(ad.mul(layers.transformer_layer(params, "blk", x, n_heads=2),
                              weights))

    weights = rng.normal(size=(2, 3, 8))
    out = run()
    out.backward()
    for name in ["blk.attn.q.w", "blk.ln1.gamma", "blk.mlp1.w", "blk.mlp2.b"]:
        p = params[name]
        flat = p.data.reshape(-1)
        picks = np.linspace(0, flat.size - 1, min(10, flat.size)).astype(int)
        for i in picks:
            orig = flat[i]
            h = 1e-6
            flat[i] = orig + h
            fp = run().item()
            flat[i] = orig - h
            fm = run().item()
            flat[i] = orig
            fd = (fp - fm) / (2 * h)
            an = p.grad.reshape(-1)[i]
            assert abs(fd - an) <= 1e-5 + 1e-4 * abs(fd)
    fd_x = numeric_grad(lambda: run().item(), x.data)
    np.testing.assert_allclose(x.grad, fd_x, atol=1e-6, rtol=1e-4)


def test_grad_accumulates_over_reuse():
    x = Tensor(np.array([2.0]), requires_grad=True)
    out = ad.tsum(ad.mul(x, x) + ad.mul(x, 3.0))
    out.backward()
    assert np.allclose(x.grad, [7.0])  # 2x + 3


def test_adam_converges_on_quadratic():
    params = {"w": Tensor(np.array([5.0, -3.0]), requires_grad=True)}
    opt = Adam(params, lr=0.1)
    for _ in range(300):
        opt.zero_grad()
        loss = ad.tsum(ad.mul(params["w"], params["w"]))
        loss.backward()
        opt.step()
    assert np.all(np.abs(params["w"].data) < 1e-2)


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(5)
        params = {}
        layers.init_linear(params, "l", 4, 3, rng)
        opt = Adam(params, lr=1e-2)
        x = Tensor(rng.normal(size=(8, 4)))
        for _ in range(10):
            opt.zero_grad()
            out = layers.linear(params, "l", x)
            ad.tsum(ad.mul(out, out)).backward()
            opt.step()
        return {k: v.data.copy() for k, v in params.items()}

    a, b = run(), run()
    for k in a:
        assert np.array_equal(a[k], b[k])
