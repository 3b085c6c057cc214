"""Stratified splitting and training-median imputation."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DataError, StratificationError


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(labels, test_fraction: float = 0.2, seed: int = 0):
    """Per-class random split; returns sorted ``(train_idx, test_idx)``.

    Each class contributes ``round(n_c * test_fraction)`` test members (at
    least one, and always leaving one for training).
    """
    labels = np.asarray(labels)
    if not 0 < test_fraction < 1:
        raise StratificationError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < 2:
            raise StratificationError(f"class {c!r} has {len(idx)} member; need at least 2")
        n_test = min(max(1, _round_half_up(len(idx) * test_fraction)), len(idx) - 1)
        perm = rng.permutation(idx)
        test.extend(perm[:n_test])
        train.extend(perm[n_test:])
    return np.sort(np.array(train, dtype=int)), np.sort(np.array(test, dtype=int))


def stratified_folds(labels, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold id in ``[0, k)`` per sample, dealing each shuffled class round-robin.

    The starting fold rotates from class to class so fold sizes stay within
    one of each other.
    """
    labels = np.asarray(labels)
    if k < 2 or k > len(labels):
        raise StratificationError(f"cannot form {k} folds from {len(labels)} samples")
    rng = np.random.default_rng(seed)
    fold = np.empty(len(labels), dtype=int)
    offset = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        fold[idx] = (np.arange(len(idx)) + offset) % k
        offset = (offset + len(idx)) % k
    return fold


class MedianImputer:
    """Replace NaN (invalid-flagged) features by the per-feature training median."""

    def __init__(self):
        self.medians = None

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        if np.isinf(X).any():
            raise DataError("features contain infinite values")
        med = np.zeros(X.shape[1])
        for j in range(X.shape[1]):
            col = X[:, j][~np.isnan(X[:, j])]
            med[j] = np.median(col) if len(col) else 0.0
        self.medians = med
        return self

    def transform(self, X):
        X = np.array(X, dtype=np.float64)
        if self.medians is None:
            raise DataError("imputer is not fitted")
        if X.shape[1] != len(self.medians):
            raise DataError(f"expected {len(self.medians)} features, got {X.shape[1]}")
        bad = np.isnan(X)
        X[bad] = np.broadcast_to(self.medians, X.shape)[bad]
        if not np.isfinite(X).all():
            raise DataError("features contain non-finite values after imputation")
        return X

    def fit_transform(self, X):
        return self.fit(X).transform(X)
