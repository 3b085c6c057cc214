"""Mean structural similarity and the reconstruction loss built on it.

Local statistics use an 11x11 Gaussian window (sigma 1.5) evaluated only
where the window fits inside the image. The window is separable, so each
filtering step is a pair of band-matrix products and its adjoint (needed
for the gradient) is the transposed pair. Computation runs in float32 when
both inputs are float32 and in float64 otherwise.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import ShapeError

WINDOW = 11
SIGMA = 1.5
K1, K2 = 0.01, 0.03


def gaussian_1d(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    t = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(t ** 2) / (2 * sigma ** 2))
    return g / g.sum()


@lru_cache(maxsize=16)
def _band(n: int, size: int, sigma: float, dtype: str) -> np.ndarray:
    """``(n - size + 1, n)`` matrix applying the 1-D window in 'valid' mode."""
    g = gaussian_1d(size, sigma)
    m = np.zeros((n - size + 1, n))
    for i in range(n - size + 1):
        m[i, i: i + size] = g
    m = m.astype(dtype)
    m.setflags(write=False)
    return m


class _Filter:
    """Separable window over the last two axes (leading axes are images)."""

    def __init__(self, h, w, size, sigma, dtype=np.float64):
        if h < size or w < size:
            raise ShapeError("mssim window", (h, w), (size, size))
        dtype = np.dtype(dtype).name
        self.r, self.c = _band(h, size, sigma, dtype), _band(w, size, sigma, dtype)

    def __call__(self, x):
        return self.r @ (x @ self.c.T)

    def adjoint(self, y):
        return self.r.T @ (y @ self.c)


def _stats(x, y, filt, data_range):
    c1, c2 = (K1 * data_range) ** 2, (K2 * data_range) ** 2
    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    a1, a2 = 2 * mx * my + c1, 2 * sxy + c2
    b1, b2 = mx * mx + my * my + c1, sxx + syy + c2
    return mx, my, a1, a2, b1, b2


def _work_dtype(x, y):
    both32 = np.asarray(x).dtype == np.float32 and np.asarray(y).dtype == np.float32
    return np.float32 if both32 else np.float64


def _as_images(x, dtype=np.float64):
    x = np.asarray(x, dtype=dtype)
    if x.ndim < 2:
        raise ShapeError("mssim", x.shape)
    return x.reshape(-1, *x.shape[-2:])


def mssim(x, y, data_range: float = 1.0, window: int = WINDOW, sigma: float = SIGMA) -> float:
    """Mean SSIM over all window positions, averaged over leading (batch and
    channel) axes."""
    if np.shape(x) != np.shape(y):
        raise ShapeError("mssim", np.shape(x), np.shape(y))
    dt = _work_dtype(x, y)
    xs, ys = _as_images(x, dt), _as_images(y, dt)
    filt = _Filter(xs.shape[1], xs.shape[2], window, sigma, dt)
    _, _, a1, a2, b1, b2 = _stats(xs, ys, filt, data_range)
    return float(np.mean(a1 * a2 / (b1 * b2), dtype=np.float64))


def mssim_and_grad(x, y, data_range: float = 1.0, window: int = WINDOW, sigma: float = SIGMA):
    """MSSIM(x, y) and its gradient with respect to ``y``."""
    if np.shape(x) != np.shape(y):
        raise ShapeError("mssim", np.shape(x), np.shape(y))
    shape = np.shape(y)
    dt = _work_dtype(x, y)
    xs, ys = _as_images(x, dt), _as_images(y, dt)
    filt = _Filter(xs.shape[1], xs.shape[2], window, sigma, dt)
    mx, my, a1, a2, b1, b2 = _stats(xs, ys, filt, data_range)
    s = a1 * a2 / (b1 * b2)
    ds = s / s.size
    # partials of s w.r.t. mu_y, E[y^2], E[xy] (x held fixed)
    g_my = ds * (2 * mx / a1 - 2 * mx / a2 - 2 * my / b1 + 2 * my / b2)
    g_eyy = ds * (-1.0 / b2)
    g_exy = ds * (2.0 / a2)
    grad = filt.adjoint(g_my) + 2 * ys * filt.adjoint(g_eyy) + xs * filt.adjoint(g_exy)
    return float(s.mean(dtype=np.float64)), grad.reshape(shape)


def ae_loss(x, x_rec) -> float:
    """Mean absolute error plus ``1 - MSSIM``."""
    if np.shape(x) != np.shape(x_rec):
        raise ShapeError("ae_loss", np.shape(x), np.shape(x_rec))
    dt = _work_dtype(x, x_rec)
    x, x_rec = np.asarray(x, dtype=dt), np.asarray(x_rec, dtype=dt)
    return float(np.mean(np.abs(x - x_rec), dtype=np.float64) + (1.0 - mssim(x, x_rec)))


def ae_loss_and_grad(x, x_rec):
    """Loss and its gradient with respect to the reconstruction."""
    if np.shape(x) != np.shape(x_rec):
        raise ShapeError("ae_loss", np.shape(x), np.shape(x_rec))
    dt = _work_dtype(x, x_rec)
    x, x_rec = np.asarray(x, dtype=dt), np.asarray(x_rec, dtype=dt)
    diff = x_rec - x
    l1 = np.mean(np.abs(diff), dtype=np.float64)
    s, g_s = mssim_and_grad(x, x_rec)
    grad = np.sign(diff) * dt(1.0 / diff.size) - g_s
    return float(l1 + 1.0 - s), grad
