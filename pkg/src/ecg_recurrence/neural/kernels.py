"""Forward/backward kernels for the small CNNs used here (NCHW layout).

Each ``*_forward`` returns ``(out, cache)`` and the matching ``*_backward``
takes the upstream gradient and the cache. Convolutions are computed one
sample at a time so a sample's activations never depend on which other
samples share its batch, and the im2col buffer stays bounded.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import ShapeError


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """Padded sample ``(C, Hp, Wp)`` -> ``(C*kh*kw, ho*wo)`` patch matrix."""
    c = xp.shape[0]
    cols = np.empty((c, kh, kw, ho, wo), dtype=xp.dtype)
    for a in range(kh):
        for b in range(kw):
            cols[:, a, b] = xp[:, a: a + stride * ho: stride, b: b + stride * wo: stride]
    return cols.reshape(c * kh * kw, ho * wo)


def conv_output_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _pad(x, pad):
    return np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x


def conv2d_forward(x, w, b, stride: int = 1, pad: int = 0):
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError("conv2d", x.shape, w.shape)
    if b.shape != (w.shape[0],):
        raise ShapeError("conv2d bias", b.shape, (w.shape[0],))
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    ho, wo = conv_output_size(h, kh, stride, pad), conv_output_size(wd, kw, stride, pad)
    if ho < 1 or wo < 1:
        raise ShapeError("conv2d", x.shape, w.shape)
    wmat = w.reshape(o, -1)
    out = np.empty((n, o, ho, wo), dtype=np.result_type(x, w))
    for i in range(n):
        cols = _im2col(_pad(x[i], pad), kh, kw, stride, ho, wo)
        out[i] = (wmat @ cols).reshape(o, ho, wo)
    out += b[None, :, None, None]
    return out, (x, w, stride, pad)


def conv2d_backward(dout, cache):
    x, w, stride, pad = cache
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    ho, wo = dout.shape[2:]
    wmat = w.reshape(o, -1)
    dw = np.zeros((o, c * kh * kw), dtype=np.float64)
    db = dout.sum(axis=(0, 2, 3), dtype=np.float64)
    dx = np.empty_like(x)
    # stride 1: the input gradient is the full correlation of dout with the
    # spatially flipped, channel-transposed kernel
    flipped = None
    if stride == 1 and pad <= kh - 1 and pad <= kw - 1:
        flipped = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(c, -1).copy()
    for i in range(n):
        cols = _im2col(_pad(x[i], pad), kh, kw, stride, ho, wo)
        dflat = dout[i].reshape(o, -1)
        dw += dflat @ cols.T
        if flipped is not None:
            dpad = np.pad(dout[i], ((0, 0), (kh - 1 - pad, kh - 1 - pad),
                                    (kw - 1 - pad, kw - 1 - pad)))
            dcols = _im2col(dpad, kh, kw, 1, h, wd)
            dx[i] = (flipped @ dcols).reshape(c, h, wd)
            continue
        dcols = (wmat.T @ dflat).reshape(c, kh, kw, ho, wo)
        dxp = np.zeros((c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
        for a in range(kh):
            for bb in range(kw):
                dxp[:, a: a + stride * ho: stride, bb: bb + stride * wo: stride] += dcols[:, a, bb]
        dx[i] = dxp[:, pad: pad + h, pad: pad + wd]
    return dx, dw.reshape(w.shape).astype(w.dtype), db.astype(w.dtype)


# Nearest x2 upsampling followed by a 3x3, pad-1 convolution touches each
# low-res pixel through one of four parity-dependent kernels; row-tap maps
# for output parity 0 and 1 (low-res offsets -1, 0, +1):
_PARITY_TAPS = np.array([[[1, 0, 0], [0, 1, 1], [0, 0, 0]],
                         [[0, 0, 0], [1, 1, 0], [0, 0, 1]]], dtype=np.float64)


def _parity_kernels(w):
    a = _PARITY_TAPS.astype(w.dtype)
    # weff[p, q] = A_p @ w @ A_q^T over the two kernel axes
    return np.einsum("pak,ockl,qbl->pqocab", a, w, a)


def upsample_conv2d_forward(x, w, b):
    """Equivalent to ``conv2d(upsample_nearest(x, 2), w, b, stride=1, pad=1)``
    for 3x3 kernels, computed on the low-resolution input."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1] or w.shape[2:] != (3, 3):
        raise ShapeError("upsample_conv2d", x.shape, w.shape)
    n, c, h, wd = x.shape
    o = w.shape[0]
    weff = _parity_kernels(w).reshape(2, 2, o, c * 9)
    out = np.empty((n, o, 2 * h, 2 * wd), dtype=np.result_type(x, w))
    for i in range(n):
        cols = _im2col(_pad(x[i], 1), 3, 3, 1, h, wd)
        for p in range(2):
            for q in range(2):
                out[i, :, p::2, q::2] = (weff[p, q] @ cols).reshape(o, h, wd)
    out += b[None, :, None, None]
    return out, (x, w)


def upsample_conv2d_backward(dout, cache):
    x, w = cache
    n, c, h, wd = x.shape
    o = w.shape[0]
    weff = _parity_kernels(w).reshape(2, 2, o, c * 9)
    dweff = np.zeros((2, 2, o, c * 9), dtype=np.float64)
    db = dout.sum(axis=(0, 2, 3), dtype=np.float64)
    dx = np.empty_like(x)
    for i in range(n):
        cols = _im2col(_pad(x[i], 1), 3, 3, 1, h, wd)
        dcols = np.zeros((c * 9, h * wd), dtype=x.dtype)
        for p in range(2):
            for q in range(2):
                g = np.ascontiguousarray(dout[i, :, p::2, q::2]).reshape(o, -1)
                dweff[p, q] += g @ cols.T
                dcols += weff[p, q].T @ g
        dcols = dcols.reshape(c, 3, 3, h, wd)
        dxp = np.zeros((c, h + 2, wd + 2), dtype=x.dtype)
        for a in range(3):
            for bb in range(3):
                dxp[:, a: a + h, bb: bb + wd] += dcols[:, a, bb]
        dx[i] = dxp[:, 1: 1 + h, 1: 1 + wd]
    dw = np.einsum("pak,pqocab,qbl->ockl", _PARITY_TAPS, dweff.reshape(2, 2, o, c, 3, 3),
                   _PARITY_TAPS)
    return dx, dw.astype(w.dtype), db.astype(w.dtype)


def relu_forward(x):
    return np.maximum(x, 0), x


def relu_backward(dout, x):
    return dout * (x > 0)


def sigmoid_forward(x):
    out = expit(x)
    return out, out


def sigmoid_backward(dout, out):
    return dout * out * (1.0 - out)


def maxpool2d_forward(x, size: int = 2):
    """Non-overlapping ``size`` x ``size`` max pooling; odd borders are dropped."""
    if x.ndim != 4:
        raise ShapeError("maxpool2d", x.shape)
    n, c, h, w = x.shape
    ho, wo = h // size, w // size
    if ho < 1 or wo < 1:
        raise ShapeError("maxpool2d", x.shape, (size, size))
    blocks = x[:, :, : ho * size, : wo * size].reshape(n, c, ho, size, wo, size)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, size * size)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg, size)


def maxpool2d_backward(dout, cache):
    shape, arg, size = cache
    n, c, h, w = shape
    ho, wo = arg.shape[2:]
    blocks = np.zeros((n, c, ho, wo, size * size), dtype=dout.dtype)
    np.put_along_axis(blocks, arg[..., None], dout[..., None], axis=-1)
    blocks = blocks.reshape(n, c, ho, wo, size, size).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(shape, dtype=dout.dtype)
    dx[:, :, : ho * size, : wo * size] = blocks.reshape(n, c, ho * size, wo * size)
    return dx


def upsample_nearest_forward(x, factor: int = 2):
    if x.ndim != 4:
        raise ShapeError("upsample_nearest", x.shape)
    return x.repeat(factor, axis=2).repeat(factor, axis=3), factor


def upsample_nearest_backward(dout, factor: int):
    n, c, h, w = dout.shape
    return dout.reshape(n, c, h // factor, factor, w // factor, factor).sum(axis=(3, 5))


def dense_forward(x, w, b):
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError("dense", x.shape, w.shape)
    if b.shape != (w.shape[1],):
        raise ShapeError("dense bias", b.shape, (w.shape[1],))
    return x @ w + b, (x, w)


def dense_backward(dout, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_forward(z):
    p = softmax(z)
    return p, p


def softmax_backward(dout, p):
    return p * (dout - np.sum(dout * p, axis=-1, keepdims=True))


def cross_entropy_forward(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("cross_entropy", logits.shape, labels.shape)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(len(labels)), labels].mean()
    return float(loss), (np.exp(logp), labels)


def cross_entropy_backward(cache):
    p, labels = cache
    g = p.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    return g / len(labels)
