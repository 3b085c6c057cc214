"""Phase-space reconstruction and recurrence surfaces.

Delay selection uses the first minimum of the average mutual information
(AMI), the embedding dimension comes from Cao's E1 statistic, and the
resulting state matrix is turned into a Euclidean distance matrix, a binary
recurrence plot, or a fixed-size grayscale recurrence image.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ChannelOrderError,
    DataError,
    DegenerateSignalError,
    InvalidThresholdError,
    SeriesTooShortError,
)

CANONICAL_CHANNELS = ("i", "ii", "iii", "avr", "avl", "avf",
                      "v1", "v2", "v3", "v4", "v5", "v6", "vx", "vy", "vz")
AMI_BINS = 16
CAO_TOLERANCE = 0.05
IMAGE_SIZE = 224


class ConstantMatrixWarning(UserWarning):
    """A distance surface carries no structure (all entries equal)."""


@dataclass(frozen=True)
class EmbeddingParams:
    m: int
    tau: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.tau < 1:
            raise DataError(f"embedding needs m >= 1 and tau >= 1, got m={self.m}, tau={self.tau}")
        if self.k <= 0:
            raise SeriesTooShortError(f"n={self.n} too short for m={self.m}, tau={self.tau}")

    @property
    def k(self) -> int:
        return self.n - (self.m - 1) * self.tau


@dataclass(frozen=True)
class CaoResult:
    m: int
    e1: np.ndarray  # E1(d) for d = 1..m_max-1
    e2: np.ndarray


@dataclass(frozen=True)
class BinaryRecurrencePlot:
    bits: np.ndarray
    epsilon: float
    theta_convention: str = "theta(0)=1"

    @property
    def k(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class RecurrenceImage:
    pixels: np.ndarray  # (size, size) uint8
    source_k: int
    channel_index: int = -1
    degenerate: bool = False

    def as_unit(self) -> np.ndarray:
        return self.pixels.astype(np.float32) / 255.0


# -- delay and dimension ---------------------------------------------------

def mutual_information(x: np.ndarray, lag: int, bins: int = AMI_BINS) -> float:
    """Histogram estimate (equal-width bins over the series range) of the
    mutual information between ``x[t]`` and ``x[t + lag]``, in nats."""
    x = np.asarray(x, dtype=np.float64)
    a, b = x[:-lag] if lag else x, x[lag:]
    lo, hi = x.min(), x.max()
    h, _, _ = np.histogram2d(a, b, bins=bins, range=[[lo, hi], [lo, hi]])
    p = h / h.sum()
    px, py = p.sum(axis=1), p.sum(axis=0)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / np.outer(px, py)[nz])))


def _first_minimum(curve: np.ndarray, rel_tol: float = 0.1) -> int | None:
    """Index of the first minimum of ``curve``; rises smaller than ``rel_tol``
    of the curve's range are treated as flat, and a flat bottom resolves to
    its midpoint. ``None`` when the curve never turns upward."""
    tol = rel_tol * (curve.max() - curve.min())
    best = 0
    for i in range(1, len(curve)):
        if curve[i] < curve[best]:
            best = i
        elif curve[i] - curve[best] > tol:
            lo = hi = best
            while lo > 0 and curve[lo - 1] <= curve[best] + tol:
                lo -= 1
            while hi + 1 < len(curve) and curve[hi + 1] <= curve[best] + tol:
                hi += 1
            return (lo + hi) // 2
    return None


def select_delay(x, max_lag: int = 50, bins: int = AMI_BINS) -> int:
    """Time lag from the first AMI minimum over lags ``1..max_lag``.

    If the lag-1 AMI is already within twice the histogram estimator's bias
    ``(bins-1)^2 / 2n`` the series is treated as having no memory and 1 is
    returned. The curve is smoothed with a 3-lag moving average before the
    minimum search, since equal-width binning leaves a ripple on periodic
    signals. Without an AMI minimum the first autocorrelation zero crossing
    is used, and failing that 1.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("select_delay expects a 1-D series")
    if np.ptp(x) == 0:
        raise DegenerateSignalError("constant series has no delay structure")
    if len(x) <= 4 * max_lag:
        raise SeriesTooShortError(f"need more than {4 * max_lag} samples for max_lag={max_lag}")
    ami = np.array([mutual_information(x, lag, bins) for lag in range(1, max_lag + 1)])
    bias = (bins - 1) ** 2 / (2.0 * (len(x) - 1))
    if ami[0] <= 2.0 * bias:
        return 1
    smooth = np.convolve(np.pad(ami, 1, mode="edge"), np.ones(3) / 3.0, mode="valid")
    idx = _first_minimum(smooth)
    if idx is not None:
        return idx + 1
    xc = x - x.mean()
    acf = np.array([np.dot(xc[:-lag], xc[lag:]) for lag in range(1, max_lag + 1)])
    crossing = np.flatnonzero(acf <= 0)
    return int(crossing[0]) + 1 if len(crossing) else 1


def _nearest_nonidentical(points: np.ndarray, eps: float):
    """Nearest neighbour (max norm) of every point, skipping neighbours
    closer than ``eps`` (duplicated states)."""
    n = len(points)
    tree = cKDTree(points)
    k = min(4, n)
    while True:
        dist, idx = tree.query(points, k=k, p=np.inf)
        ok = dist[:, 1:] > eps
        if ok.any(axis=1).all() or k >= n:
            break
        k = min(4 * k, n)
    if not ok.any(axis=1).all():
        raise DegenerateSignalError("every state has only identical neighbours")
    j = np.argmax(ok, axis=1) + 1
    rows = np.arange(n)
    return idx[rows, j], dist[rows, j]


def cao_statistics(x, tau: int, m_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Cao's E1(d) and E2(d) for d = 1..m_max-1 (max-norm neighbours)."""
    x = np.asarray(x, dtype=np.float64)
    if m_max < 2:
        raise DataError("m_max must be at least 2")
    if len(x) - m_max * tau < 10:
        raise SeriesTooShortError(f"{len(x)} samples too short for m_max={m_max}, tau={tau}")
    if np.ptp(x) == 0:
        raise DegenerateSignalError("constant series")
    eps = 1e-9 * np.ptp(x)
    e, e_star = [], []
    for d in range(1, m_max + 1):
        n = len(x) - d * tau
        y_d = embed(x, d, tau)[:n]
        nn, dist = _nearest_nonidentical(y_d, eps)
        # the (d+1)-th coordinate is the only one that changes between d and d+1
        extra = np.abs(x[np.arange(n) + d * tau] - x[nn + d * tau])
        e.append(np.mean(np.maximum(dist, extra) / dist))
        e_star.append(np.mean(extra))
    e, e_star = np.array(e), np.array(e_star)
    with np.errstate(divide="ignore", invalid="ignore"):
        e2 = e_star[1:] / e_star[:-1]
    return e[1:] / e[:-1], e2


def cao_dimension(x, tau: int, m_max: int = 10, tol: float = CAO_TOLERANCE) -> CaoResult:
    """Smallest d with ``|E1(d) - 1| < tol``; ``m_max`` if E1 never settles."""
    e1, e2 = cao_statistics(x, tau, m_max)
    hits = np.flatnonzero(np.abs(e1 - 1.0) < tol)
    m = int(hits[0]) + 1 if len(hits) else m_max
    return CaoResult(m=m, e1=e1, e2=e2)


def auto_embedding(x, max_lag: int = 50, m_max: int = 10) -> EmbeddingParams:
    tau = select_delay(x, max_lag=max_lag)
    m = cao_dimension(x, tau, m_max).m
    return EmbeddingParams(m=m, tau=tau, n=len(x))


# -- state matrix and distances ----------------------------------------------

def embed(x, m: int, tau: int) -> np.ndarray:
    """``(k, m)`` delay-coordinate matrix, row i = (x_i, x_{i+tau}, ...)."""
    x = np.asarray(x, dtype=np.float64)
    if m < 1 or tau < 1:
        raise DataError(f"embedding needs m >= 1 and tau >= 1, got m={m}, tau={tau}")
    k = len(x) - (m - 1) * tau
    if k < 2:
        raise SeriesTooShortError(f"n={len(x)} too short for m={m}, tau={tau}")
    return np.stack([x[j * tau: j * tau + k] for j in range(m)], axis=1)


def distance_matrix(states: np.ndarray, block: int = 1024) -> np.ndarray:
    """Euclidean distances between all state vectors.

    Squared differences are accumulated coordinate by coordinate (no Gram
    trick), so the result is exactly symmetric with an exact zero diagonal.
    """
    s = np.asarray(states, dtype=np.float64)
    if s.ndim == 1:
        s = s[:, None]
    k = s.shape[0]
    if k < 2:
        raise SeriesTooShortError("need at least two states")
    out = np.empty((k, k))
    for r0 in range(0, k, block):
        r1 = min(r0 + block, k)
        acc = np.zeros((r1 - r0, k))
        for j in range(s.shape[1]):
            diff = s[r0:r1, j, None] - s[None, :, j]
            acc += diff * diff
        np.sqrt(acc, out=out[r0:r1])
    return out


def threshold(dm: np.ndarray, epsilon: float) -> BinaryRecurrencePlot:
    if not epsilon >= 0:
        raise InvalidThresholdError(f"epsilon must be non-negative, got {epsilon}")
    return BinaryRecurrencePlot(bits=np.asarray(dm) <= epsilon, epsilon=float(epsilon))


def _inverted_cdf(values: np.ndarray, q: float) -> float:
    """Smallest value v with at least a fraction ``q`` of ``values`` <= v."""
    v = np.sort(values, axis=None)
    idx = max(int(np.ceil(q * len(v))) - 1, 0)
    return float(v[min(idx, len(v) - 1)])


def epsilon_for_target_rr(dm: np.ndarray, target_rr: float) -> float:
    """Threshold at the ``target_rr`` quantile of the off-diagonal distances."""
    if not 0 < target_rr < 1:
        raise InvalidThresholdError(f"target recurrence rate must lie in (0, 1), got {target_rr}")
    dm = np.asarray(dm)
    off = dm[np.triu_indices(dm.shape[0], 1)]
    if off.size == 0 or np.ptp(off) == 0:
        warnings.warn("all off-diagonal distances are equal", ConstantMatrixWarning, stacklevel=2)
    return _inverted_cdf(off, target_rr)


def quantile_threshold(values: np.ndarray, target_rr: float) -> float:
    """Same quantile rule over every cell (used for latent maps, which have
    no identity line)."""
    if not 0 < target_rr < 1:
        raise InvalidThresholdError(f"target recurrence rate must lie in (0, 1), got {target_rr}")
    return _inverted_cdf(np.asarray(values), target_rr)


# -- images ---------------------------------------------------------------

def _interp_weights(k: int, size: int, mode: str) -> np.ndarray:
    """``(size, k)`` matrix mapping a length-k profile onto ``size`` samples
    with corner-aligned coordinates."""
    w = np.zeros((size, k))
    pos = np.arange(size) * ((k - 1) / (size - 1)) if size > 1 else np.zeros(1)
    rows = np.arange(size)
    if mode == "nearest":
        w[rows, np.clip(np.rint(pos).astype(int), 0, k - 1)] = 1.0
        return w
    if mode != "bilinear":
        raise ValueError(f"unknown interpolation {mode!r}")
    i0 = np.clip(np.floor(pos).astype(int), 0, k - 1)
    i1 = np.minimum(i0 + 1, k - 1)
    frac = pos - i0
    np.add.at(w, (rows, i0), 1.0 - frac)
    np.add.at(w, (rows, i1), frac)
    return w


def resize_surface(dm: np.ndarray, size: int = IMAGE_SIZE, mode: str = "bilinear") -> np.ndarray:
    dm = np.asarray(dm, dtype=np.float64)
    k = dm.shape[0]
    if dm.ndim != 2 or dm.shape[1] != k or k < 2:
        raise DataError(f"expected a square matrix with k >= 2, got shape {dm.shape}")
    if k == size:
        return dm.copy()
    w = _interp_weights(k, size, mode)
    return w @ dm @ w.T


def normalize_to_uint8(surface: np.ndarray, constant: bool | None = None
                       ) -> tuple[np.ndarray, bool]:
    lo, hi = surface.min(), surface.max()
    if constant is None:
        constant = hi == lo
    if constant:
        warnings.warn("constant surface mapped to mid-gray", ConstantMatrixWarning, stacklevel=3)
        return np.full(surface.shape, 128, dtype=np.uint8), True
    scaled = (surface - lo) * (255.0 / (hi - lo))
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8), False


def resize_to_image(dm: np.ndarray, size: int = IMAGE_SIZE, mode: str = "bilinear",
                    channel_index: int = -1) -> RecurrenceImage:
    """Interpolate the distance surface onto a ``size`` x ``size`` grid and
    min-max scale it to 8-bit gray."""
    surface = resize_surface(dm, size, mode)
    # decide constancy on the input: interpolation adds rounding noise
    dm = np.asarray(dm)
    pixels, degenerate = normalize_to_uint8(surface, constant=bool(dm.min() == dm.max()))
    return RecurrenceImage(pixels=pixels, source_k=dm.shape[0], channel_index=channel_index,
                           degenerate=degenerate)


def stack_subject(images: list[RecurrenceImage], channel_order=CANONICAL_CHANNELS,
                  size: int = IMAGE_SIZE) -> np.ndarray:
    """Stack per-channel images into an ``(n_channels, size, size)`` float32
    tensor scaled to [0, 1], ordered by each image's ``channel_index``."""
    n = len(channel_order)
    if len(images) != n:
        raise ChannelOrderError(f"expected {n} channel images, got {len(images)}")
    slots: list[RecurrenceImage | None] = [None] * n
    for img in images:
        ci = img.channel_index
        if not 0 <= ci < n:
            raise ChannelOrderError(f"channel index {ci} outside 0..{n - 1}")
        if slots[ci] is not None:
            raise ChannelOrderError(f"channel {channel_order[ci]!r} supplied twice")
        if img.pixels.shape != (size, size):
            raise ChannelOrderError(f"channel {channel_order[ci]!r} has shape {img.pixels.shape}")
        slots[ci] = img
    return np.stack([img.as_unit() for img in slots])


def channel_index(label: str, channel_order=CANONICAL_CHANNELS) -> int:
    try:
        return list(channel_order).index(label.strip().lower())
    except ValueError:
        raise ChannelOrderError(f"channel {label!r} not in {list(channel_order)}") from None


def diagonal_profile(bits: np.ndarray) -> np.ndarray:
    """Number of recurrent cells on each upper diagonal offset 0..k-1."""
    k = bits.shape[0]
    return np.array([np.trace(bits, offset=d) for d in range(k)], dtype=np.int64)


# -- binary matrix dump ----------------------------------------------------

_DUMP_HEADER = struct.Struct("<II")


def write_matrix_dump(path: str | Path, dm: np.ndarray) -> None:
    dm = np.asarray(dm)
    k = dm.shape[0]
    with open(path, "wb") as fh:
        fh.write(_DUMP_HEADER.pack(k, 0))
        fh.write(np.ascontiguousarray(dm, dtype="<f4").tobytes())


def read_matrix_dump(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _DUMP_HEADER.size:
        raise DataError(f"{path}: truncated matrix dump")
    k, _ = _DUMP_HEADER.unpack_from(raw)
    body = raw[_DUMP_HEADER.size:]
    if len(body) != 4 * k * k:
        raise DataError(f"{path}: expected {k}x{k} floats, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f4").reshape(k, k).astype(np.float64)


@dataclass
class ChannelSurface:
    """Everything the pipeline keeps for one channel."""
    label: str
    params: EmbeddingParams
    distances: np.ndarray = field(repr=False)
    image: RecurrenceImage = field(repr=False)


def channel_surface(x, label: str, m: int | None = None, tau: int | None = None,
                    size: int = IMAGE_SIZE, mode: str = "bilinear", index: int = -1,
                    max_lag: int = 50, m_max: int = 10) -> ChannelSurface:
    """Embed one channel (pinned or estimated parameters) and build its image."""
    x = np.asarray(x, dtype=np.float64)
    if tau is None:
        tau = select_delay(x, max_lag=max_lag)
    if m is None:
        m = cao_dimension(x, tau, m_max).m
    params = EmbeddingParams(m=m, tau=tau, n=len(x))
    dm = distance_matrix(embed(x, m, tau))
    return ChannelSurface(label=label, params=params, distances=dm,
                          image=resize_to_image(dm, size, mode, channel_index=index))
