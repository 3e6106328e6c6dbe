"""Vectorised layer primitives with hand-written backward passes.

Every forward returns ``(out, cache)`` and the matching backward consumes
``(dout, cache)``.  Convolutions are stride-1 with "same" padding, realised
as im2col plus one GEMM; the data gradient is itself a convolution with the
spatially flipped kernel under the complementary padding, which keeps the
backward pass on the BLAS fast path instead of a scatter loop.

Arrays are channels-last: images are ``(B, H, W, C)``.  All ops preserve
their input dtype so the same code runs float32 for training and float64
for finite-difference checks.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _im2col(x_padded: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(B, H', W', Ci) padded input -> (B*H*W, kh*kw*Ci) patch matrix."""
    win = sliding_window_view(x_padded, (kh, kw), axis=(1, 2))
    b, h, w, ci, _, _ = win.shape
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(b * h * w, kh * kw * ci)


def _same_pad(kh: int, kw: int) -> tuple[int, int, int, int]:
    return (kh - 1) // 2, kh // 2, (kw - 1) // 2, kw // 2


def conv2d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray):
    """Stride-1 same-padding convolution; kernel is (kh, kw, Ci, Co)."""
    b, h, w, _ = x.shape
    kh, kw, ci, co = kernel.shape
    pt, pb, pl, pr = _same_pad(kh, kw)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    cols = _im2col(xp, kh, kw)
    out = cols @ kernel.reshape(kh * kw * ci, co)
    out = out.reshape(b, h, w, co)
    out += bias
    return out, x


def conv2d_backward(dout: np.ndarray, x: np.ndarray, kernel: np.ndarray,
                    need_dx: bool = True):
    """Gradients (dx, dk, db) for :func:`conv2d_forward`.

    ``need_dx=False`` skips the data gradient (dx comes back None); the
    first layer's input gradient is dead weight and its im2col buffer is
    by far the largest allocation in the whole backward pass.
    """
    b, h, w, ci = x.shape
    kh, kw, _, co = kernel.shape
    pt, pb, pl, pr = _same_pad(kh, kw)

    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    cols = _im2col(xp, kh, kw)
    dout_flat = dout.reshape(b * h * w, co)
    dk = (cols.T @ dout_flat).reshape(kh, kw, ci, co)
    db = dout_flat.sum(axis=0)

    if not need_dx:
        return None, dk, db
    # dx is the correlation of dout with the flipped kernel, padded with the
    # complement of the forward padding.
    kflip = kernel[::-1, ::-1].transpose(0, 1, 3, 2)  # (kh, kw, Co, Ci)
    dp = np.pad(dout, ((0, 0), (pb, pt), (pr, pl), (0, 0)))
    dcols = _im2col(dp, kh, kw)
    dx = (dcols @ kflip.reshape(kh * kw * co, ci)).reshape(b, h, w, ci)
    return dx, dk, db


def maxpool2_forward(x: np.ndarray):
    """2x2 stride-2 max pooling with floor division (odd edges dropped)."""
    b, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    v = (
        x[:, : h2 * 2, : w2 * 2, :]
        .reshape(b, h2, 2, w2, 2, c)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(b, h2, w2, c, 4)
    )
    idx = v.argmax(axis=-1).astype(np.uint8)
    out = np.take_along_axis(v, idx[..., None].astype(np.int64), axis=-1)[..., 0]
    return out, (x.shape, idx)


def maxpool2_backward(dout: np.ndarray, cache):
    (b, h, w, c), idx = cache
    h2, w2 = h // 2, w // 2
    dv = np.zeros((b, h2, w2, c, 4), dtype=dout.dtype)
    np.put_along_axis(dv, idx[..., None].astype(np.int64), dout[..., None], axis=-1)
    dx = np.zeros((b, h, w, c), dtype=dout.dtype)
    dx[:, : h2 * 2, : w2 * 2, :] = (
        dv.reshape(b, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(b, h2 * 2, w2 * 2, c)
    )
    return dx


def relu_forward(x: np.ndarray):
    out = np.maximum(x, 0)
    return out, out > 0


def relu_backward(dout: np.ndarray, mask: np.ndarray):
    return dout * mask


def prelu_forward(x: np.ndarray, slope: np.ndarray):
    """PReLU with a single learnable slope shared across all units."""
    out = np.where(x > 0, x, slope * x)
    return out.astype(x.dtype), x


def prelu_backward(dout: np.ndarray, x: np.ndarray, slope: np.ndarray):
    dx = dout * np.where(x > 0, x.dtype.type(1), slope.astype(x.dtype))
    dslope = np.sum(dout * np.where(x > 0, 0, x), dtype=x.dtype)
    return dx, np.asarray(dslope, dtype=slope.dtype)


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    return x @ weight + bias, x


def dense_backward(dout: np.ndarray, x: np.ndarray, weight: np.ndarray):
    dx = dout @ weight.T
    dw = x.T @ dout
    db = dout.sum(axis=0)
    return dx, dw, db


def dropout_forward(x: np.ndarray, rate: float, seed: int):
    """Inverted dropout; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * mask, mask


def dropout_backward(dout: np.ndarray, mask: np.ndarray):
    return dout * mask


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_forward(inputs: np.ndarray, wx: np.ndarray, wh: np.ndarray, bias: np.ndarray,
                 h0: np.ndarray, c0: np.ndarray):
    """Standard LSTM over a (T, B, D) sequence; gate order is i, f, g, o.

    Returns the hidden-state sequence (T, B, H), the final (h, c) pair, and
    the per-step cache for :func:`lstm_backward`.
    """
    t_len, batch, _ = inputs.shape
    hidden = wh.shape[0]
    h, c = h0, c0
    hs = np.empty((t_len, batch, hidden), dtype=inputs.dtype)
    caches = []
    for t in range(t_len):
        z = inputs[t] @ wx + h @ wh + bias
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden : 2 * hidden])
        g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        o = _sigmoid(z[:, 3 * hidden :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        caches.append((inputs[t], h, c, i, f, g, o, tanh_c))
        h, c = h_new, c_new
        hs[t] = h
    return hs, (h, c), caches


def lstm_backward(dhs: np.ndarray, caches, wx: np.ndarray, wh: np.ndarray):
    """Backprop through time.  ``dhs`` is the gradient on every hidden state."""
    t_len, batch, hidden = dhs.shape
    din = np.empty((t_len, batch, wx.shape[0]), dtype=dhs.dtype)
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(wx.shape[1], dtype=wx.dtype)
    dh_next = np.zeros((batch, hidden), dtype=dhs.dtype)
    dc_next = np.zeros((batch, hidden), dtype=dhs.dtype)
    for t in range(t_len - 1, -1, -1):
        x_t, h_prev, c_prev, i, f, g, o, tanh_c = caches[t]
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tanh_c**2)
        do = dh * tanh_c
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g**2),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dwx += x_t.T @ dz
        dwh += h_prev.T @ dz
        db += dz.sum(axis=0)
        din[t] = dz @ wx.T
        dh_next = dz @ wh.T
        dc_next = dc * f
    return din, dwx, dwh, db, dh_next, dc_next
