"""Hand-chained numpy layers: valid conv, 2x2 max-pool, dense, ReLU, softmax-CE, Adam.

All layer functions take a leading batch axis. Backward functions receive the
upstream gradient plus whatever the forward pass cached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(x, w, b):
    """Valid cross-correlation: (B, Cin, Q, P) * (Cout, Cin, kh, kw) -> (B, Cout, Q-kh+1, P-kw+1)."""
    x = np.asarray(x, dtype=np.float64)
    cout, cin, kh, kw = w.shape
    if x.ndim != 4 or x.shape[1] != cin:
        raise ValueError(f"conv input {x.shape} incompatible with kernels {w.shape}")
    if x.shape[2] < kh or x.shape[3] < kw:
        raise ValueError(f"conv kernel {kh}x{kw} larger than input {x.shape[2:]}")
    if b.shape != (cout,):
        raise ValueError(f"bias shape {b.shape} != ({cout},)")
    cols = sliding_window_view(x, (kh, kw), axis=(2, 3))  # B, Cin, Qo, Po, kh, kw
    return np.einsum("bcijkl,ockl->boij", cols, w, optimize=True) + b[None, :, None, None]


def conv2d_backward(x, w, dout):
    """Returns (dx, dw, db)."""
    cout, cin, kh, kw = w.shape
    cols = sliding_window_view(x, (kh, kw), axis=(2, 3))
    dw = np.einsum("bcijkl,boij->ockl", cols, dout, optimize=True)
    db = dout.sum(axis=(0, 2, 3))
    dx = np.zeros_like(x)
    qo, po = dout.shape[2], dout.shape[3]
    for k in range(kh):
        for l in range(kw):
            dx[:, :, k:k + qo, l:l + po] += np.einsum("boij,oc->bcij", dout, w[:, :, k, l])
    return dx, dw, db


def maxpool2d_forward(x):
    """2x2 stride-2 max pool; odd trailing rows/cols are dropped. Returns (out, argmax)."""
    bsz, c, q, p = x.shape
    if q < 2 or p < 2:
        raise ValueError(f"max-pool needs at least 2x2 input, got {q}x{p}")
    qo, po = q // 2, p // 2
    blocks = x[:, :, :2 * qo, :2 * po].reshape(bsz, c, qo, 2, po, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(bsz, c, qo, po, 4)
    arg = flat.argmax(axis=-1)  # first occurrence on ties
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, arg


def maxpool2d_backward(x_shape, arg, dout):
    bsz, c, q, p = x_shape
    qo, po = arg.shape[2], arg.shape[3]
    flat = np.zeros((bsz, c, qo, po, 4))
    np.put_along_axis(flat, arg[..., None], dout[..., None], axis=-1)
    blocks = flat.reshape(bsz, c, qo, po, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(bsz, c, 2 * qo, 2 * po)
    dx = np.zeros(x_shape)
    dx[:, :, :2 * qo, :2 * po] = blocks
    return dx


def fc_forward(x, w, b):
    """Dense layer with ``w`` shaped (out, in)."""
    return x @ w.T + b


def fc_backward(x, w, dout):
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(x, dout):
    return dout * (x > 0)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient wrt ``logits``.

    A single 1-D logit vector with an int label is accepted too.
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    if single:
        logits = logits[None]
        labels = [labels]
    labels = np.asarray(labels, dtype=np.int64)
    k = logits.shape[1]
    if np.any(labels < 0) or np.any(labels >= k):
        raise ValueError(f"label out of range for {k} classes")
    z = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(labels))
    loss = float(np.mean(logz - z[rows, labels]))
    d = softmax(logits)
    d[rows, labels] -= 1.0
    d /= len(labels)
    return loss, (d[0] if single else d)


def glorot_uniform(rng, shape, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape)


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    if set(grads) != set(params):
        raise ValueError(f"gradient keys {sorted(grads)} != parameter keys {sorted(params)}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k in sorted(params):
        g = np.asarray(grads[k], dtype=np.float64)
        if g.shape != params[k].shape:
            raise ValueError(f"gradient for {k!r} has shape {g.shape}, expected {params[k].shape}")
        m = state.m.get(k)
        if m is None:
            m = state.m[k] = np.zeros_like(params[k])
            state.v[k] = np.zeros_like(params[k])
        v = state.v[k]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        params[k] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
