"""Tree ensembles: softmax gradient boosting with depth-2 regression trees,
and SAMME boosting of decision stumps with random undersampling (RUSBoost).

Split thresholds and leaf values are rounded to float32 as they are chosen,
so a model restored from a float32 checkpoint predicts exactly as before.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import check_xy, class_prior, one_hot, softmax

_F32 = np.float32


def _candidate_splits(x):
    """Sort order and float32 mid-point thresholds between distinct values."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    pos = np.flatnonzero(xs[1:] > xs[:-1])
    thr = ((xs[pos] + xs[pos + 1]) / 2).astype(_F32)
    return order, pos, thr


class RegressionTree:
    """Second-order regression tree stored as flat node arrays.

    Node ``i`` has ``feature[i] < 0`` for a leaf; otherwise samples with
    ``x[feature] <= threshold`` go to ``left[i]``.
    """

    def __init__(self, max_depth=2, reg_lambda=1.0, min_gain=1e-12):
        self.max_depth, self.reg_lambda, self.min_gain = max_depth, reg_lambda, min_gain
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def _leaf(self, g, h):
        return float(_F32(-g.sum() / (h.sum() + self.reg_lambda)))

    def _new(self, value):
        for arr, v in ((self.feature, -1), (self.threshold, 0.0), (self.left, -1),
                       (self.right, -1), (self.value, value)):
            arr.append(v)
        return len(self.value) - 1

    def _split_gains(self, X, g, h):
        """Yield ``(feature, thresholds, gains)`` for every candidate split."""
        lam = self.reg_lambda
        G, H = g.sum(), h.sum()
        parent = G * G / (H + lam)
        for j in range(X.shape[1]):
            order, pos, thr = _candidate_splits(X[:, j])
            if not len(pos):
                continue
            gl, hl = np.cumsum(g[order])[pos], np.cumsum(h[order])[pos]
            yield j, thr, gl ** 2 / (hl + lam) + (G - gl) ** 2 / (H - hl + lam) - parent

    def _best_split(self, X, g, h):
        best = (self.min_gain, -1, 0.0)
        for j, thr, gain in self._split_gains(X, g, h):
            k = int(np.argmax(gain))
            if gain[k] > best[0]:
                best = (gain[k], j, float(thr[k]))
        return best

    def _lookahead_split(self, X, g, h):
        """Best split by the total gain of itself plus its best child splits.

        Used when no single split helps on its own (e.g. an XOR layout).
        """
        best = (self.min_gain, -1, 0.0)
        for j, thr, gain in self._split_gains(X, g, h):
            for t, gk in zip(thr, gain):
                mask = X[:, j] <= t
                total = gk
                for m in (mask, ~mask):
                    if m.sum() >= 2:
                        total += max(self._best_split(X[m], g[m], h[m])[0], 0.0)
                if total > best[0]:
                    best = (total, j, float(t))
        return best

    def _grow(self, X, g, h, depth):
        node = self._new(self._leaf(g, h))
        if depth >= self.max_depth or len(g) < 2:
            return node
        _, j, t = self._best_split(X, g, h)
        if j < 0 and depth + 1 < self.max_depth:
            _, j, t = self._lookahead_split(X, g, h)
        if j < 0:
            return node
        mask = X[:, j] <= t
        if mask.all() or not mask.any():
            return node
        self.feature[node], self.threshold[node] = j, t
        self.left[node] = self._grow(X[mask], g[mask], h[mask], depth + 1)
        self.right[node] = self._grow(X[~mask], g[~mask], h[~mask], depth + 1)
        return node

    def fit(self, X, g, h):
        self._grow(X, g, h, 0)
        self._freeze()
        return self

    def _freeze(self):
        self.feature = np.asarray(self.feature, dtype=int)
        self.threshold = np.asarray(self.threshold, dtype=_F32)
        self.left = np.asarray(self.left, dtype=int)
        self.right = np.asarray(self.right, dtype=int)
        self.value = np.asarray(self.value, dtype=_F32)

    def predict(self, X):
        node = np.zeros(len(X), dtype=int)
        rows = np.arange(len(X))
        for _ in range(self.max_depth + 1):
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            go_left = X[rows, np.maximum(feat, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)
        return self.value[node].astype(np.float64)

    def to_array(self):
        return np.stack([self.feature, self.threshold, self.left, self.right,
                         self.value]).astype(_F32)

    @classmethod
    def from_array(cls, arr, max_depth=2):
        tree = cls(max_depth=max_depth)
        tree.feature, tree.left, tree.right = (arr[i].astype(int) for i in (0, 2, 3))
        tree.threshold, tree.value = arr[1].astype(_F32), arr[4].astype(_F32)
        return tree


@dataclass
class BoostingConfig:
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 2
    reg_lambda: float = 1.0


class GradientBoostedTrees:
    """Multi-class gradient boosting on the softmax cross-entropy, one
    regression tree per class per round, started from the log class prior."""

    def __init__(self, n_classes: int = 5, config: BoostingConfig | None = None):
        self.n_classes = n_classes
        self.config = config or BoostingConfig()
        self.init = None
        self.trees: list[list[RegressionTree]] = []

    def fit(self, X, y):
        X, y = check_xy(X, y, self.n_classes)
        cfg = self.config
        prior = class_prior(y, self.n_classes)
        self.init = np.log(np.maximum(prior, 1e-12)).astype(_F32)
        F = np.tile(self.init.astype(np.float64), (len(X), 1))
        Y = one_hot(y, self.n_classes)
        self.trees = []
        for _ in range(cfg.rounds):
            P = softmax(F)
            round_trees = []
            for k in range(self.n_classes):
                g = P[:, k] - Y[:, k]
                h = np.maximum(P[:, k] * (1 - P[:, k]), 1e-12)
                tree = RegressionTree(cfg.max_depth, cfg.reg_lambda).fit(X, g, h)
                round_trees.append(tree)
            for k, tree in enumerate(round_trees):
                F[:, k] += _F32(cfg.learning_rate) * tree.predict(X)
            self.trees.append(round_trees)
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        F = np.tile(self.init.astype(np.float64), (len(X), 1))
        lr = _F32(self.config.learning_rate)
        for round_trees in self.trees:
            for k, tree in enumerate(round_trees):
                F[:, k] += lr * tree.predict(X)
        return F

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def state_dict(self, prefix="gbt."):
        n_nodes = max((t.value.size for r in self.trees for t in r), default=1)
        packed = np.zeros((len(self.trees), self.n_classes, 5, n_nodes), dtype=_F32)
        packed[:, :, 0] = -1
        for i, r in enumerate(self.trees):
            for k, t in enumerate(r):
                arr = t.to_array()
                packed[i, k, :, : arr.shape[1]] = arr
        cfg = self.config
        return {prefix + "init": self.init, prefix + "trees": packed,
                prefix + "config": np.array([cfg.rounds, cfg.learning_rate, cfg.max_depth,
                                             cfg.reg_lambda], dtype=_F32)}

    def load_state_dict(self, state, prefix="gbt."):
        rounds, lr, depth, lam = state[prefix + "config"]
        self.config = BoostingConfig(int(rounds), float(lr), int(depth), float(lam))
        self.init = state[prefix + "init"].astype(_F32)
        self.n_classes = len(self.init)
        packed = state[prefix + "trees"]
        self.trees = [[RegressionTree.from_array(packed[i, k], int(depth))
                       for k in range(packed.shape[1])] for i in range(packed.shape[0])]
        return self


@dataclass
class RusBoostConfig:
    rounds: int = 100
    learning_rate: float = 1.0
    seed: int = 0


class RUSBoost:
    """SAMME over decision stumps, each fitted on a class-balanced random
    undersample (every class cut to the minority-class size).

    Probabilities are the alpha-weighted vote shares; if no splitting stump
    beats chance the ensemble is empty and the class prior is returned.
    """

    def __init__(self, n_classes: int = 5, config: RusBoostConfig | None = None):
        self.n_classes = n_classes
        self.config = config or RusBoostConfig()
        self.stumps = np.zeros((0, 4), dtype=_F32)  # feature, threshold, left class, right class
        self.alpha = np.zeros(0, dtype=_F32)
        self.prior = None

    def _fit_stump(self, X, y, w):
        K = self.n_classes
        total = np.bincount(y, weights=w, minlength=K)
        best_err = w.sum() - total.max()
        best = (-1, 0.0, int(total.argmax()), int(total.argmax()))
        Yw = one_hot(y, K) * w[:, None]
        for j in range(X.shape[1]):
            order, pos, thr = _candidate_splits(X[:, j])
            if not len(pos):
                continue
            cum = np.cumsum(Yw[order], axis=0)[pos]
            right = total - cum
            err = w.sum() - cum.max(axis=1) - right.max(axis=1)
            k = int(np.argmin(err))
            if err[k] < best_err - 1e-12:
                best_err = err[k]
                best = (j, float(thr[k]), int(cum[k].argmax()), int(right[k].argmax()))
        return best

    @staticmethod
    def _stump_predict(stump, X):
        j, t, lc, rc = stump
        j = int(j)
        if j < 0:
            return np.full(len(X), int(lc))
        return np.where(X[:, j] <= t, int(lc), int(rc))

    def fit(self, X, y):
        X, y = check_xy(X, y, self.n_classes)
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        self.prior = class_prior(y, self.n_classes).astype(_F32)
        present = np.flatnonzero(np.bincount(y, minlength=self.n_classes))
        k_eff = len(present)
        n_min = min(int((y == c).sum()) for c in present)
        w = np.full(len(y), 1.0 / len(y))
        stumps, alphas = [], []
        for _ in range(cfg.rounds):
            sub = np.sort(np.concatenate([rng.choice(np.flatnonzero(y == c), n_min, replace=False)
                                          for c in present]))
            ws = w[sub] / w[sub].sum()
            stump = np.array(self._fit_stump(X[sub], y[sub], ws), dtype=np.float64)
            if stump[0] < 0:
                continue  # no split: a balanced sample carries no information
            stump[1] = _F32(stump[1])
            miss = self._stump_predict(stump, X) != y
            err = w[miss].sum() / w.sum()
            if err >= 1.0 - 1.0 / k_eff:
                continue
            err = max(err, 1e-10)
            alpha = float(_F32(cfg.learning_rate * (np.log((1 - err) / err) + np.log(k_eff - 1))))
            stumps.append(stump)
            alphas.append(alpha)
            w = w * np.exp(alpha * miss)
            w /= w.sum()
        self.stumps = np.array(stumps, dtype=_F32).reshape(-1, 4)
        self.alpha = np.array(alphas, dtype=_F32)
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        if not len(self.alpha) or self.alpha.sum() <= 0:
            return np.tile(self.prior.astype(np.float64), (len(X), 1))
        votes = np.zeros((len(X), self.n_classes))
        rows = np.arange(len(X))
        for stump, a in zip(self.stumps.astype(np.float64), self.alpha.astype(np.float64)):
            votes[rows, self._stump_predict(stump, X)] += a
        return votes / votes.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def state_dict(self, prefix="rus."):
        return {prefix + "stumps": self.stumps, prefix + "alpha": self.alpha,
                prefix + "prior": self.prior}

    def load_state_dict(self, state, prefix="rus."):
        self.stumps = state[prefix + "stumps"].reshape(-1, 4)
        self.alpha = state[prefix + "alpha"]
        self.prior = state[prefix + "prior"]
        self.n_classes = len(self.prior)
        return self
