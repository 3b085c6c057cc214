from __future__ import annotations

import numpy as np

from ..errors import DataError, DegenerateLabelsError


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def check_xy(X, y, n_classes):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise DataError(f"bad training set shapes {X.shape} / {y.shape}")
    if not np.isfinite(X).all():
        raise DataError("training features must be finite (impute first)")
    if y.min() < 0 or y.max() >= n_classes:
        raise DataError(f"labels must lie in [0, {n_classes})")
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError("training labels contain a single class")
    return X, y


def class_prior(y, n_classes):
    return np.bincount(y, minlength=n_classes) / len(y)


def one_hot(y, n_classes):
    out = np.zeros((len(y), n_classes))
    out[np.arange(len(y)), y] = 1.0
    return out
