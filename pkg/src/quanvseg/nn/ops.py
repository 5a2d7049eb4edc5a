"""Dense NCHW tensor ops with hand-derived backward passes.

Every forward returns (output, cache); the matching backward consumes
(cache, gy) and returns gradients in input order.  The ops are pure:
batch norm hands back updated running statistics instead of mutating
its arguments.  Convolution follows the cross-correlation convention
(no kernel flip).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ShapeError


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int):
    """(N, C, Hp, Wp) -> ((N, L, C*kh*kw) patch matrix, H_out, W_out)."""
    n = xp.shape[0]
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    h_out, w_out = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, h_out * w_out, -1)
    return np.ascontiguousarray(cols), h_out, w_out


def _col2im(gcols, x_shape, kh, kw, stride, padding):
    """Scatter-add column gradients back onto the input raster."""
    n, c, h, w = x_shape
    hp, wp = h + 2 * padding, w + 2 * padding
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1
    g6 = gcols.reshape(n, h_out, w_out, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    gx = np.zeros((n, c, hp, wp), dtype=gcols.dtype)
    for i in range(kh):
        for j in range(kw):
            gx[:, :, i : i + stride * (h_out - 1) + 1 : stride,
               j : j + stride * (w_out - 1) + 1 : stride] += g6[:, :, i, j]
    if padding:
        gx = gx[:, :, padding : hp - padding, padding : wp - padding]
    return np.ascontiguousarray(gx)


def conv2d_forward(x, w, b=None, stride: int = 1, padding: int = 0):
    """Cross-correlate (N, C_in, H, W) with (C_out, C_in, kH, kW) + bias."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d shapes disagree: input {x.shape}, kernel {w.shape}")
    c_out, _, kh, kw = w.shape
    if b is not None and b.shape != (c_out,):
        raise ShapeError(f"bias shape {b.shape} != ({c_out},)")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    if kh > xp.shape[2] or kw > xp.shape[3]:
        raise ShapeError(f"kernel {kh}x{kw} exceeds padded input {xp.shape[2:]}")
    n = x.shape[0]
    cols, h_out, w_out = _im2col(xp, kh, kw, stride)
    out = cols @ w.reshape(c_out, -1).T
    if b is not None:
        out = out + b
    out = np.ascontiguousarray(out.transpose(0, 2, 1).reshape(n, c_out, h_out, w_out))
    return out, (cols, x.shape, w, b is not None, stride, padding)


def conv2d_backward(cache, gy):
    """Returns (gx, gw, gb); gb is None when the forward had no bias."""
    cols, x_shape, w, has_b, stride, padding = cache
    n = x_shape[0]
    c_out, _, kh, kw = w.shape
    gy2 = gy.reshape(n, c_out, -1).transpose(0, 2, 1)
    gb = gy.sum(axis=(0, 2, 3)) if has_b else None
    gw = np.tensordot(gy2, cols, axes=([0, 1], [0, 1])).reshape(w.shape)
    gcols = gy2 @ w.reshape(c_out, -1)
    gx = _col2im(gcols, x_shape, kh, kw, stride, padding)
    return gx, gw, gb


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(cache, gy):
    return gy * cache


def sigmoid_forward(x):
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out, out


def sigmoid_backward(cache, gy):
    return gy * cache * (1.0 - cache)


def maxpool2x2_forward(x):
    """Non-overlapping 2x2 max; spatial dims must be even."""
    if x.ndim != 4:
        raise ShapeError(f"expected NCHW input, got shape {x.shape}")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2x2 needs even spatial dims, got {h}x{w}")
    win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def maxpool2x2_backward(cache, gy):
    idx, x_shape = cache
    n, c, h, w = x_shape
    g = np.zeros((n, c, h // 2, w // 2, 4), dtype=gy.dtype)
    np.put_along_axis(g, idx[..., None], gy[..., None], axis=-1)
    g = g.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(g.reshape(n, c, h, w))


def nearest_upsample2x_forward(x):
    if x.ndim != 4:
        raise ShapeError(f"expected NCHW input, got shape {x.shape}")
    return x.repeat(2, axis=2).repeat(2, axis=3), x.shape


def nearest_upsample2x_backward(cache, gy):
    n, c, h, w = cache
    return gy.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5))


def transposed_conv2x_forward(x, w, b=None):
    """2x2 stride-2 transposed convolution; w shaped (C_in, C_out, 2, 2).

    The stride equals the kernel so output blocks never overlap:
    out[n, o, 2i+a, 2j+b] = sum_c x[n, c, i, j] * w[c, o, a, b].
    """
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[0] or w.shape[2:] != (2, 2):
        raise ShapeError(f"transposed_conv2x shapes disagree: input {x.shape}, kernel {w.shape}")
    n, _, h, wd = x.shape
    c_out = w.shape[1]
    if b is not None and b.shape != (c_out,):
        raise ShapeError(f"bias shape {b.shape} != ({c_out},)")
    out = np.einsum("nchw,cokl->nohkwl", x, w, optimize=True)
    out = np.ascontiguousarray(out).reshape(n, c_out, 2 * h, 2 * wd)
    if b is not None:
        out = out + b[None, :, None, None]
    return out, (x, w, b is not None)


def transposed_conv2x_backward(cache, gy):
    x, w, has_b = cache
    n, _, h, wd = x.shape
    c_out = w.shape[1]
    g6 = gy.reshape(n, c_out, h, 2, wd, 2)
    gx = np.einsum("nohkwl,cokl->nchw", g6, w, optimize=True)
    gw = np.einsum("nohkwl,nchw->cokl", g6, x, optimize=True)
    gb = gy.sum(axis=(0, 2, 3)) if has_b else None
    return np.ascontiguousarray(gx), np.ascontiguousarray(gw), gb


def concat_channels_forward(a, b):
    if a.ndim != 4 or b.ndim != 4 or a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(f"cannot concat channels of {a.shape} and {b.shape}")
    return np.concatenate([a, b], axis=1), a.shape[1]


def concat_channels_backward(cache, gy):
    split = cache
    return np.ascontiguousarray(gy[:, :split]), np.ascontiguousarray(gy[:, split:])


def _unbroadcast(g, shape):
    """Sum a gradient down to `shape` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add_forward(a, b):
    try:
        out = a + b
    except ValueError:
        raise ShapeError(f"cannot add shapes {a.shape} and {b.shape}") from None
    return out, (a.shape, b.shape)


def add_backward(cache, gy):
    sa, sb = cache
    return _unbroadcast(gy, sa), _unbroadcast(gy, sb)


def mul_forward(a, b):
    try:
        out = a * b
    except ValueError:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}") from None
    return out, (a, b)


def mul_backward(cache, gy):
    a, b = cache
    return _unbroadcast(gy * b, a.shape), _unbroadcast(gy * a, b.shape)


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train: bool,
                      momentum: float = 0.1, eps: float = 1e-5):
    """Per-channel batch norm over the batch and spatial axes.

    Returns (out, new_running_mean, new_running_var, cache).  Train mode
    normalizes with the batch statistics (biased variance) and blends
    them into the running values; eval mode normalizes with the running
    values and returns them unchanged.
    """
    if x.ndim != 4:
        raise ShapeError(f"expected NCHW input, got shape {x.shape}")
    c = x.shape[1]
    for name, arr in (("gamma", gamma), ("beta", beta),
                      ("running_mean", running_mean), ("running_var", running_var)):
        if arr.shape != (c,):
            raise ShapeError(f"{name} shape {arr.shape} != ({c},)")
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        new_mean = (1.0 - momentum) * running_mean + momentum * mean
        new_var = (1.0 - momentum) * running_var + momentum * var
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    ivar = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * ivar[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, new_mean, new_var, (xhat, gamma, ivar, train)


def batchnorm_backward(cache, gy):
    """Returns (gx, ggamma, gbeta)."""
    xhat, gamma, ivar, train = cache
    gbeta = gy.sum(axis=(0, 2, 3))
    ggamma = (gy * xhat).sum(axis=(0, 2, 3))
    gxhat = gy * gamma[None, :, None, None]
    if not train:
        return gxhat * ivar[None, :, None, None], ggamma, gbeta
    m = gy.shape[0] * gy.shape[2] * gy.shape[3]
    s1 = gxhat.sum(axis=(0, 2, 3), keepdims=True)
    s2 = (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
    gx = (gxhat - s1 / m - xhat * (s2 / m)) * ivar[None, :, None, None]
    return gx, ggamma, gbeta


def bce_loss(pred, target):
    """Mean binary cross-entropy and its gradient w.r.t. pred.

    Predictions are clamped to [1e-7, 1 - 1e-7]; the gradient is zero
    where the clamp is active.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"predictions {pred.shape} vs targets {target.shape}")
    lo, hi = 1e-7, 1.0 - 1e-7
    p = np.clip(pred, lo, hi)
    loss = float(-np.mean(target * np.log(p) + (1.0 - target) * np.log1p(-p)))
    inside = (pred > lo) & (pred < hi)
    grad = np.where(inside, (p - target) / (p * (1.0 - p)), 0.0) / pred.size
    return loss, grad.astype(pred.dtype, copy=False)
