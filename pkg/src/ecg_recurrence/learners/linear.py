"""Linear models: one-vs-rest hinge-loss SVM and multinomial logistic regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ._common import check_xy, class_prior, one_hot, softmax


@dataclass
class SvmConfig:
    lam: float = 1e-3
    iterations: int = 2000
    lr: float = 0.1


class LinearSVM:
    """One-vs-rest linear SVM on standardised features.

    Each class gets an L2-regularised hinge objective minimised by full-batch
    sub-gradient descent with step ``lr / sqrt(t)``. Probabilities are a
    softmax over the per-class margins. If no feature varies in the training
    set there is nothing to separate and the model returns the class prior.
    """

    def __init__(self, n_classes: int = 5, config: SvmConfig | None = None):
        self.n_classes = n_classes
        self.config = config or SvmConfig()
        self.mean = self.scale = self.weight = self.bias = None
        self.prior = None

    def fit(self, X, y):
        X, y = check_xy(X, y, self.n_classes)
        cfg = self.config
        self.prior = class_prior(y, self.n_classes).astype(np.float32)
        mean, sd = X.mean(axis=0), X.std(axis=0)
        self.mean = mean.astype(np.float32)
        self.scale = np.where(sd > 0, sd, 1.0).astype(np.float32)
        Z = (X - self.mean) / self.scale
        n, d = Z.shape
        W, b = np.zeros((d, self.n_classes)), np.zeros(self.n_classes)
        if (sd > 0).any():
            Y = 2.0 * one_hot(y, self.n_classes) - 1.0
            for t in range(1, cfg.iterations + 1):
                active = Y * (Z @ W + b) < 1.0
                coef = np.where(active, Y, 0.0) / n
                eta = cfg.lr / np.sqrt(t)
                W -= eta * (cfg.lam * W - Z.T @ coef)
                b += eta * coef.sum(axis=0)
            self.weight, self.bias = W.astype(np.float32), b.astype(np.float32)
        else:
            self.weight, self.bias = None, None
        return self

    def decision_function(self, X):
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return Z @ self.weight + self.bias

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.weight is None:
            return np.tile(self.prior.astype(np.float64), (len(X), 1))
        return softmax(self.decision_function(X))

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def state_dict(self, prefix="svm."):
        state = {prefix + "mean": self.mean, prefix + "scale": self.scale,
                 prefix + "prior": self.prior}
        if self.weight is not None:
            state[prefix + "weight"] = self.weight
            state[prefix + "bias"] = self.bias
        return state

    def load_state_dict(self, state, prefix="svm."):
        self.mean, self.scale = state[prefix + "mean"], state[prefix + "scale"]
        self.prior = state[prefix + "prior"]
        self.n_classes = len(self.prior)
        self.weight = state.get(prefix + "weight")
        self.bias = state.get(prefix + "bias")
        return self


@dataclass
class LogisticConfig:
    lr: float = 0.5
    max_iter: int = 5000
    tol: float = 1e-8


class MultinomialLogistic:
    """Softmax regression fitted by full-batch gradient descent on the mean
    cross-entropy; stops once the loss changes by less than ``tol``."""

    def __init__(self, n_classes: int = 5, config: LogisticConfig | None = None):
        self.n_classes = n_classes
        self.config = config or LogisticConfig()
        self.weight = self.bias = None
        self.n_iter = 0
        self.loss = float("nan")

    def fit(self, X, y):
        X, y = check_xy(X, y, self.n_classes)
        cfg = self.config
        n, d = X.shape
        Y = one_hot(y, self.n_classes)
        W, b = np.zeros((d, self.n_classes)), np.zeros(self.n_classes)
        prev = np.inf
        for it in range(1, cfg.max_iter + 1):
            z = X @ W + b
            z -= z.max(axis=1, keepdims=True)
            logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
            loss = -(Y * logp).sum() / n
            if abs(prev - loss) < cfg.tol:
                break
            prev = loss
            g = (np.exp(logp) - Y) / n
            W -= cfg.lr * (X.T @ g)
            b -= cfg.lr * g.sum(axis=0)
        self.n_iter, self.loss = it, float(loss)
        self.weight, self.bias = W.astype(np.float32), b.astype(np.float32)
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        if not np.isfinite(X).all():
            raise DataError("meta-features must be finite")
        return softmax(X @ self.weight + self.bias)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def state_dict(self, prefix="meta."):
        return {prefix + "weight": self.weight, prefix + "bias": self.bias}

    def load_state_dict(self, state, prefix="meta."):
        self.weight, self.bias = state[prefix + "weight"], state[prefix + "bias"]
        self.n_classes = len(self.bias)
        return self
