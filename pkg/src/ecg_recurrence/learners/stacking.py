"""Two-level stacking: three base learners whose class probabilities feed a
multinomial logistic meta-model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..neural import checkpoint
from ._common import check_xy
from .boosting import BoostingConfig, GradientBoostedTrees, RUSBoost, RusBoostConfig
from .linear import LinearSVM, LogisticConfig, MultinomialLogistic, SvmConfig
from .split import MedianImputer, stratified_folds

BASE_NAMES = ("svm", "gbt", "rus")


@dataclass
class StackingConfig:
    n_classes: int = 5
    folds: int = 5
    seed: int = 0
    in_sample: bool = False  # meta-features from in-sample base predictions (leaky)
    svm: SvmConfig | None = None
    boosting: BoostingConfig | None = None
    rus_rounds: int = 100
    meta: LogisticConfig | None = None


class StackedModel:
    def __init__(self, config: StackingConfig | None = None):
        self.config = config or StackingConfig()
        self.imputer = MedianImputer()
        self.bases = None
        self.meta = None

    def _make_bases(self, seed):
        cfg = self.config
        return [LinearSVM(cfg.n_classes, cfg.svm),
                GradientBoostedTrees(cfg.n_classes, cfg.boosting),
                RUSBoost(cfg.n_classes, RusBoostConfig(rounds=cfg.rus_rounds, seed=seed))]

    @staticmethod
    def _meta_features(bases, X):
        return np.hstack([b.predict_proba(X) for b in bases])

    def fit(self, X, y):
        """Fit on training data only. ``X`` may contain NaN for invalid features."""
        cfg = self.config
        Xi = self.imputer.fit_transform(X)
        Xi, y = check_xy(Xi, y, cfg.n_classes)
        seeds = np.random.SeedSequence(cfg.seed).generate_state(cfg.folds + 1)
        if cfg.in_sample:
            self.bases = [b.fit(Xi, y) for b in self._make_bases(int(seeds[-1]))]
            Z = self._meta_features(self.bases, Xi)
        else:
            fold = stratified_folds(y, cfg.folds, cfg.seed)
            Z = np.zeros((len(y), len(BASE_NAMES) * cfg.n_classes))
            for f in range(cfg.folds):
                tr, te = fold != f, fold == f
                fitted = [b.fit(Xi[tr], y[tr]) for b in self._make_bases(int(seeds[f]))]
                Z[te] = self._meta_features(fitted, Xi[te])
            self.bases = [b.fit(Xi, y) for b in self._make_bases(int(seeds[-1]))]
        self.meta_train = Z
        self.meta = MultinomialLogistic(cfg.n_classes, cfg.meta).fit(Z, y)
        return self

    def base_probabilities(self, X):
        return self._meta_features(self.bases, self.imputer.transform(X))

    def predict_proba(self, X):
        if self.meta is None:
            raise DataError("stacked model is not fitted")
        return self.meta.predict_proba(self.base_probabilities(X))

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def state_dict(self):
        state = {"imputer.median": self.imputer.medians.astype(np.float32),
                 "meta.n_classes": np.array([self.config.n_classes], dtype=np.float32)}
        for name, base in zip(BASE_NAMES, self.bases):
            state.update(base.state_dict(prefix=name + "."))
        state.update(self.meta.state_dict(prefix="meta."))
        return state

    def load_state_dict(self, state):
        n_classes = int(state["meta.n_classes"][0])
        self.config.n_classes = n_classes
        self.imputer.medians = state["imputer.median"].astype(np.float64)
        self.bases = [LinearSVM(n_classes).load_state_dict(state, "svm."),
                      GradientBoostedTrees(n_classes).load_state_dict(state, "gbt."),
                      RUSBoost(n_classes).load_state_dict(state, "rus.")]
        self.meta = MultinomialLogistic(n_classes).load_state_dict(state, "meta.")
        return self

    def save(self, path):
        checkpoint.save(path, self.state_dict())

    @classmethod
    def load(cls, path) -> "StackedModel":
        return cls().load_state_dict(checkpoint.load(path))
