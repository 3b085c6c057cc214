"""Wilcoxon rank-sum tests, the pairwise significance table and box-plot
summaries of RQA features."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

EXACT_MAX_N = 12
ALPHA = 0.05
PAIR_ORDER = (("HC", "BBB"), ("HC", "CM"), ("HC", "DR"), ("HC", "MI"),
              ("BBB", "CM"), ("BBB", "DR"), ("BBB", "MI"),
              ("CM", "DR"), ("CM", "MI"),
              ("DR", "MI"))


@dataclass(frozen=True)
class RankSumResult:
    statistic_u: float
    p_two_sided: float
    method: str
    n1: int
    n2: int
    tie_corrected: bool
    degenerate: bool = False


def midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    sv = values[order]
    ranks = np.empty(len(values))
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _subset_sum_counts(doubled_ranks: np.ndarray, n1: int) -> np.ndarray:
    """counts[s] = number of size-``n1`` subsets whose doubled ranks sum to s."""
    total = int(doubled_ranks.sum())
    # table[j][s]: subsets of size j among the items seen so far
    table = np.zeros((n1 + 1, total + 1), dtype=np.int64)
    table[0, 0] = 1
    for r in doubled_ranks.astype(int):
        for j in range(n1, 0, -1):
            table[j, r:] = table[j, r:] + table[j - 1, : total + 1 - r]
    return table[n1]


def exact_p_value(a, b) -> tuple[float, float]:
    """Exact two-sided p by counting every assignment of the pooled midranks
    to the first sample. Returns ``(U_a, p)``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    n1, n2 = len(a), len(b)
    ranks = midranks(np.concatenate([a, b]))
    doubled = np.rint(2 * ranks).astype(int)
    counts = _subset_sum_counts(doubled, n1)
    obs = int(doubled[:n1].sum())
    total = math.comb(n1 + n2, n1)
    le = int(sum(counts[: obs + 1]))
    ge = int(sum(counts[obs:]))
    p = min(1.0, 2.0 * min(le, ge) / total)
    u = obs / 2.0 - n1 * (n1 + 1) / 2.0
    return u, p


def normal_p_value(a, b, continuity: bool = True) -> tuple[float, float, bool]:
    a, b = np.asarray(a, float), np.asarray(b, float)
    n1, n2 = len(a), len(b)
    n = n1 + n2
    pooled = np.concatenate([a, b])
    ranks = midranks(pooled)
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    _, counts = np.unique(pooled, return_counts=True)
    ties = float(np.sum(counts ** 3 - counts))
    var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0:
        return u, 1.0, ties > 0
    dev = abs(u - n1 * n2 / 2.0)
    if continuity:
        dev = max(dev - 0.5, 0.0)
    z = dev / math.sqrt(var)
    return u, min(1.0, math.erfc(z / math.sqrt(2.0))), ties > 0


def rank_sum_test(a: Sequence[float], b: Sequence[float], method: str = "auto") -> RankSumResult:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney U) test.

    ``method="auto"`` enumerates exactly when ``n1 + n2 <= 12`` and uses the
    tie- and continuity-corrected normal approximation otherwise.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    n1, n2 = len(a), len(b)
    if n1 < 1 or n2 < 1:
        raise ValueError("both samples need at least one value")
    pooled = np.concatenate([a, b])
    tied = len(np.unique(pooled)) < len(pooled)
    if np.all(pooled == pooled[0]):
        return RankSumResult(n1 * n2 / 2.0, 1.0, "degenerate", n1, n2, True, degenerate=True)
    if method == "auto":
        method = "exact" if n1 + n2 <= EXACT_MAX_N else "normal"
    if method == "exact":
        u, p = exact_p_value(a, b)
        return RankSumResult(u, p, "exact", n1, n2, tied)
    if method == "normal":
        u, p, _ = normal_p_value(a, b)
        return RankSumResult(u, p, "normal-approximation", n1, n2, tied)
    raise ValueError(f"unknown method {method!r}")


# -- significance table --------------------------------------------------

@dataclass
class SignificanceTable:
    pairs: list[tuple[str, str]]
    features: list[str]
    p_values: np.ndarray  # (n_pairs, n_features)
    alpha: float = ALPHA
    omitted: list[str] = field(default_factory=list)

    def cell(self, i: int, j: int) -> str:
        p = self.p_values[i, j]
        return f"{p:.3f}" if p < self.alpha else "ns"

    @property
    def n_cells(self) -> int:
        return self.p_values.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["comparison", *self.features])
        for i, (x, y) in enumerate(self.pairs):
            w.writerow([f"{x}-{y}", *(self.cell(i, j) for j in range(len(self.features)))])
        for note in self.omitted:
            w.writerow([f"# omitted: {note}"])
        return buf.getvalue()


def significance_table(features_by_class: Mapping[str, np.ndarray], feature_names=None,
                       alpha: float = ALPHA, bonferroni: bool = False, method: str = "auto",
                       pair_order=PAIR_ORDER) -> SignificanceTable:
    """Rank-sum test of every feature for every class pair.

    ``features_by_class`` maps a class name to an ``(n_samples, n_features)``
    array. NaN entries (invalid features) are dropped per test. Pairs with a
    missing class are left out and listed in ``omitted``.
    """
    data = {str(k): np.atleast_2d(np.asarray(v, dtype=np.float64))
            for k, v in features_by_class.items()}
    n_feat = next(iter(data.values())).shape[1]
    feature_names = list(feature_names or [f"F{i + 1}" for i in range(n_feat)])
    pairs, omitted = [], []
    for x, y in pair_order:
        if x in data and y in data:
            pairs.append((x, y))
        else:
            omitted.append(f"{x}-{y}")
    p = np.ones((len(pairs), n_feat))
    for i, (x, y) in enumerate(pairs):
        for j in range(n_feat):
            a, b = data[x][:, j], data[y][:, j]
            a, b = a[np.isfinite(a)], b[np.isfinite(b)]
            if len(a) and len(b):
                p[i, j] = rank_sum_test(a, b, method=method).p_two_sided
    if bonferroni:
        p = np.minimum(1.0, p * p.size)
    return SignificanceTable(pairs, feature_names, p, alpha, omitted)


# -- box plots ------------------------------------------------------------

@dataclass(frozen=True)
class BoxSummary:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    outliers: tuple[float, ...]


def box_summary(values) -> BoxSummary:
    """Five-number summary with linear-interpolation quartiles; min/max are
    the most extreme points within the Tukey 1.5 IQR fences."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise ValueError("no finite values")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo) & (v <= hi)]
    out = tuple(sorted(float(x) for x in v[(v < lo) | (v > hi)]))
    return BoxSummary(float(inside.min()), float(q1), float(med), float(q3),
                      float(inside.max()), out)


def boxplot_data(features_by_class: Mapping[str, np.ndarray], feature_names=None
                 ) -> dict[tuple[str, str], BoxSummary]:
    out = {}
    for cls, arr in features_by_class.items():
        arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        names = list(feature_names or [f"F{i + 1}" for i in range(arr.shape[1])])
        for j, name in enumerate(names):
            col = arr[:, j]
            if np.isfinite(col).any():
                out[(str(cls), name)] = box_summary(col)
    return out


def boxplot_csv(summaries: Mapping[tuple[str, str], BoxSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "feature", "min", "q1", "median", "q3", "max", "outliers"])
    for (cls, feat), s in summaries.items():
        w.writerow([cls, feat, repr(s.minimum), repr(s.q1), repr(s.median), repr(s.q3),
                    repr(s.maximum), *map(repr, s.outliers)])
    return buf.getvalue()


def all_pairs(classes: Sequence[str]) -> list[tuple[str, str]]:
    return list(combinations(classes, 2))
