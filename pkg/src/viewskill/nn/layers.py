"""Parameter initialization and composite network blocks.

Models are flat ``dict[str, Tensor]`` parameter stores; the apply functions
take the store plus a name prefix so the same blocks compose into different
networks. Initialization is fully determined by the numpy Generator passed
in.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

FLOAT = np.float64


def param(params, name, array):
    t = Tensor(np.asarray(array, dtype=FLOAT), requires_grad=True)
    params[name] = t
    return t


# ---------------------------------------------------------------------------
# linear / conv


def init_linear(params, name, fan_in, fan_out, rng, scale=None):
    std = scale if scale is not None else np.sqrt(2.0 / fan_in)
    param(params, f"{name}.w", rng.normal(0.0, std, size=(fan_in, fan_out)))
    param(params, f"{name}.b", np.zeros(fan_out))


def linear(params, name, x):
    return ad.add(ad.matmul(x, params[f"{name}.w"]), params[f"{name}.b"])


def init_conv(params, name, cin, cout, k, rng):
    std = np.sqrt(2.0 / (cin * k * k))
    param(params, f"{name}.w", rng.normal(0.0, std, size=(cout, cin, k, k)))
    param(params, f"{name}.b", np.zeros(cout))


def conv(params, name, x, stride=1, pad=1):
    return ad.conv2d(x, params[f"{name}.w"], params[f"{name}.b"], stride=stride, pad=pad)


# ---------------------------------------------------------------------------
# layer norm


def init_layernorm(params, name, dim):
    param(params, f"{name}.gamma", np.ones(dim))
    param(params, f"{name}.beta", np.zeros(dim))


def layernorm(params, name, x, eps=1e-6):
    mu = ad.tmean(x, axis=-1, keepdims=True)
    centered = ad.add(x, ad.mul(mu, -1.0))
    var = ad.tmean(ad.mul(centered, centered), axis=-1, keepdims=True)
    inv = ad.power(ad.add(var, eps), -0.5)
    normed = ad.mul(centered, inv)
    return ad.add(ad.mul(normed, params[f"{name}.gamma"]), params[f"{name}.beta"])


# ---------------------------------------------------------------------------
# attention / transformer


def init_attention(params, name, d_model, rng):
    for proj in ("q", "k", "v", "o"):
        init_linear(params, f"{name}.{proj}", d_model, d_model, rng,
                    scale=np.sqrt(1.0 / d_model))


def attention(params, name, x, n_heads):
    """Multi-head self-attention over x: (N, T, D)."""
    n, t, d = x.shape
    dh = d // n_heads
    q = linear(params, f"{name}.q", x)
    k = linear(params, f"{name}.k", x)
    v = linear(params, f"{name}.v", x)

    def split_heads(z):
        z = ad.reshape(z, (n, t, n_heads, dh))
        return ad.transpose(z, (0, 2, 1, 3))  # (N, H, T, dh)

    q, k, v = split_heads(q), split_heads(k), split_heads(v)
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    weights = ad.softmax(scores, axis=-1)
    ctx = ad.matmul(weights, v)  # (N, H, T, dh)
    ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (n, t, d))
    return linear(params, f"{name}.o", ctx)


def init_transformer_layer(params, name, d_model, d_hidden, rng):
    init_layernorm(params, f"{name}.ln1", d_model)
    init_attention(params, f"{name}.attn", d_model, rng)
    init_layernorm(params, f"{name}.ln2", d_model)
    init_linear(params, f"{name}.mlp1", d_model, d_hidden, rng)
    init_linear(params, f"{name}.mlp2", d_hidden, d_model, rng,
                scale=np.sqrt(1.0 / d_hidden))


def transformer_layer(params, name, x, n_heads):
    """Pre-norm transformer encoder layer."""
    h = ad.add(x, attention(params, f"{name}.attn", layernorm(params, f"{name}.ln1", x),
                            n_heads))
    ff = linear(params, f"{name}.mlp2",
                ad.relu(linear(params, f"{name}.mlp1", layernorm(params, f"{name}.ln2", h))))
    return ad.add(h, ff)
