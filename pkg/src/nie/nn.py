"""Numpy layers with explicit backward passes.

Each ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache. Parameter gradients are
returned, never accumulated in place.
"""

from __future__ import annotations

import numpy as np

LN_EPS = 1e-5
MASK_VALUE = -1e9
_GELU_C = float(np.sqrt(2.0 / np.pi))


def linear_forward(x, w, b):
    return x @ w + b, x


def linear_backward(dy, x, w):
    dx = dy @ w.T
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dx, x2.T @ dy2, dy2.sum(axis=0)


def layernorm_forward(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv, g)


def layernorm_backward(dy, cache):
    xhat, inv, g = cache
    d = xhat.shape[-1]
    dyf = dy.reshape(-1, d)
    dg = (dyf * xhat.reshape(-1, d)).sum(axis=0)
    db = dyf.sum(axis=0)
    dxhat = dy * g
    dx = inv / d * (
        d * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    return dx, dg, db


def gelu_forward(x):
    inner = _GELU_C * (x + 0.044715 * (x * x * x))
    t = np.tanh(inner)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(dy, cache):
    x, t = cache
    dinner = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner)


def softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def attention_forward(q, k, v, key_mask):
    """Scaled dot-product attention over (B, H, L, dh) inputs.

    ``key_mask`` is (B, L) boolean, True for real positions; padded keys get
    exactly zero weight.
    """
    scale = 1.0 / float(np.sqrt(q.shape[-1]))
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    scores = np.where(key_mask[:, None, None, :], scores, scores.dtype.type(MASK_VALUE))
    # Reductions over the key axis run in float64: their length grows with
    # padding, and float32 accumulation order would otherwise leak a few ULPs
    # into the unpadded rows.
    a = softmax(scores.astype(np.float64))
    out = (a @ v.astype(np.float64)).astype(q.dtype, copy=False)
    a = a.astype(q.dtype, copy=False)
    return out, (q, k, v, a, scale)


def attention_backward(dout, cache):
    q, k, v, a, scale = cache
    dv = a.transpose(0, 1, 3, 2) @ dout
    da = dout @ v.transpose(0, 1, 3, 2)
    ds = a * (da - (da * a).sum(axis=-1, keepdims=True))
    dq = (ds @ k) * scale
    dk = (ds.transpose(0, 1, 3, 2) @ q) * scale
    return dq, dk, dv


def embedding_backward(ids, dx, vocab_size):
    """Scatter-add rows of ``dx`` into a (vocab_size, d) gradient, in a fixed order."""
    d = dx.shape[-1]
    flat = ids.reshape(-1)
    rows = dx.reshape(-1, d)
    order = np.argsort(flat, kind="stable")
    sorted_ids = flat[order]
    starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    out = np.zeros((vocab_size, d), dtype=dx.dtype)
    out[sorted_ids[starts]] = np.add.reduceat(rows[order], starts, axis=0)
    return out


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over positions with ``labels >= 0``.

    Returns ``(loss, dlogits)``; ignored positions get zero gradient.
    """
    valid = labels >= 0
    count = max(int(valid.sum()), 1)
    z = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - logz
    safe = np.where(valid, labels, 0)
    picked = np.take_along_axis(logp, safe[..., None], axis=-1)[..., 0]
    loss = -(picked * valid).sum() / count
    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, safe[..., None],
                      np.take_along_axis(dlogits, safe[..., None], axis=-1) - 1.0, axis=-1)
    dlogits *= (valid / count)[..., None]
    return float(loss), dlogits.astype(logits.dtype, copy=False)
