"""Recurrence quantification: line-length histograms and features F1-F10.

Run lengths are counted on a copy of the binary matrix; when the line of
identity is excluded it is blanked first, and every normalisation (RR,
DET, LAM) is taken over the remaining cells. Runs touching the matrix edge
count as complete lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import BinaryRecurrencePlot, quantile_threshold
from .errors import EmptyInputError

FEATURE_NAMES = ("rr", "det", "avg_diag", "lmax", "entropy", "lam", "tt", "vmax", "div", "ratio")
FEATURE_CODES = tuple(f"F{i}" for i in range(1, 11))
LATENT_TARGET_RR = 0.15


@dataclass(frozen=True)
class LineHistograms:
    diagonal: np.ndarray  # diagonal[l] = number of diagonal lines of length l
    vertical: np.ndarray
    l_min: int
    v_min: int
    loi_excluded: bool
    n_cells: int
    n_recurrent: int

    def diagonal_dict(self) -> dict[int, int]:
        return {int(l): int(c) for l, c in enumerate(self.diagonal) if c}

    def vertical_dict(self) -> dict[int, int]:
        return {int(l): int(c) for l, c in enumerate(self.vertical) if c}


@dataclass(frozen=True)
class RqaFeatures:
    rr: float
    det: float
    avg_diag: float
    lmax: float
    entropy: float
    lam: float
    tt: float
    vmax: float
    div: float
    ratio: float
    valid: tuple[bool, ...]

    def vector(self) -> np.ndarray:
        """Feature values in F1..F10 order; invalid entries are NaN."""
        return np.array([getattr(self, n) for n in FEATURE_NAMES], dtype=np.float64)

    def flags(self) -> str:
        return "".join("1" if v else "0" for v in self.valid)

    def is_valid(self, name: str) -> bool:
        return self.valid[FEATURE_NAMES.index(name)]


def _run_lengths(rows: np.ndarray) -> np.ndarray:
    """Lengths of all maximal runs of 1s along the rows of a 2-D 0/1 array."""
    padded = np.zeros((rows.shape[0], rows.shape[1] + 2), dtype=np.int8)
    padded[:, 1:-1] = rows
    flat = padded.ravel()
    d = np.diff(flat)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return ends - starts


def _diagonals_as_rows(bits: np.ndarray) -> np.ndarray:
    """``(2k-1, k)`` array whose row r holds diagonal offset r-(k-1), zero-padded."""
    k = bits.shape[0]
    out = np.zeros((2 * k - 1, k), dtype=np.int8)
    i, j = np.indices(bits.shape)
    out[(j - i + k - 1).ravel(), i.ravel()] = bits.ravel()
    return out


def line_histograms(rp, l_min: int = 2, v_min: int = 2, exclude_loi: bool = True
                    ) -> LineHistograms:
    bits = rp.bits if isinstance(rp, BinaryRecurrencePlot) else rp
    bits = np.asarray(bits, dtype=bool)
    if bits.size == 0:
        raise EmptyInputError("empty recurrence matrix")
    if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
        raise EmptyInputError(f"recurrence matrix must be square, got {bits.shape}")
    k = bits.shape[0]
    if exclude_loi:
        bits = bits.copy()
        np.fill_diagonal(bits, False)
    diag = np.bincount(_run_lengths(_diagonals_as_rows(bits)), minlength=k + 1)
    vert = np.bincount(_run_lengths(bits.T.astype(np.int8)), minlength=k + 1)
    n_cells = k * k - (k if exclude_loi else 0)
    return LineHistograms(diagonal=diag, vertical=vert, l_min=l_min, v_min=v_min,
                          loi_excluded=exclude_loi, n_cells=n_cells,
                          n_recurrent=int(bits.sum()))


def rqa_features(h: LineHistograms) -> RqaFeatures:
    """Features F1-F10 from line histograms.

    Quantities defined over qualifying lines (length >= l_min or v_min) are
    flagged invalid when no such line exists; DET/LAM/ratio are flagged when
    the plot has no recurrent cell at all.
    """
    lengths_d = np.arange(len(h.diagonal))
    lengths_v = np.arange(len(h.vertical))
    nan = math.nan

    rr = h.n_recurrent / h.n_cells if h.n_cells else nan
    total_d = int(np.dot(lengths_d, h.diagonal))
    total_v = int(np.dot(lengths_v, h.vertical))
    qd = h.diagonal[h.l_min:]
    qv = h.vertical[h.v_min:]
    ld, lv = lengths_d[h.l_min:], lengths_v[h.v_min:]
    pts_d, lines_d = int(np.dot(ld, qd)), int(qd.sum())
    pts_v, lines_v = int(np.dot(lv, qv)), int(qv.sum())

    has_points = h.n_recurrent > 0
    det = pts_d / total_d if has_points and total_d else nan
    lam = pts_v / total_v if has_points and total_v else nan
    if lines_d:
        avg_diag = pts_d / lines_d
        lmax = float(ld[qd > 0].max())
        p = qd[qd > 0] / lines_d
        entropy = float(-np.sum(p * np.log(p)))
        entropy = abs(entropy) if entropy == 0 else entropy
        div = 1.0 / lmax
    else:
        avg_diag = lmax = entropy = div = nan
    if lines_v:
        tt = pts_v / lines_v
        vmax = float(lv[qv > 0].max())
    else:
        tt = vmax = nan
    ratio = det / rr if has_points and not math.isnan(det) else nan

    values = (rr, det, avg_diag, lmax, entropy, lam, tt, vmax, div, ratio)
    valid = tuple(not math.isnan(v) for v in values)
    return RqaFeatures(*values, valid=valid)


def compute_rqa(rp, l_min: int = 2, v_min: int = 2, exclude_loi: bool = True) -> RqaFeatures:
    return rqa_features(line_histograms(rp, l_min, v_min, exclude_loi))


def invalid_features() -> RqaFeatures:
    return RqaFeatures(*([math.nan] * 10), valid=(False,) * 10)


def binarize_latent(surface: np.ndarray, epsilon: float | None = None,
                    target_rr: float | None = LATENT_TARGET_RR) -> np.ndarray | None:
    """Min-max scale a latent map to [0, 1] and mark cells ``<= epsilon``.

    Without an explicit ``epsilon`` the threshold is the ``target_rr``
    quantile over all cells. Returns ``None`` for a constant map.
    """
    s = np.asarray(surface, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise EmptyInputError(f"latent surface must be square, got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise EmptyInputError("latent surface has non-finite entries")
    lo, hi = s.min(), s.max()
    if hi == lo:
        return None
    u = (s - lo) / (hi - lo)
    if epsilon is None:
        if target_rr is None:
            raise ValueError("need either epsilon or target_rr")
        epsilon = quantile_threshold(u, target_rr)
    return u <= epsilon


def latent_rqa(surface: np.ndarray, epsilon: float | None = None,
               target_rr: float | None = LATENT_TARGET_RR, l_min: int = 2,
               v_min: int = 2) -> RqaFeatures:
    """RQA of a latent embedding map; the identity line is kept because a
    latent map is not a self-distance matrix."""
    bits = binarize_latent(surface, epsilon, target_rr)
    if bits is None:
        return invalid_features()
    return compute_rqa(bits, l_min, v_min, exclude_loi=False)
