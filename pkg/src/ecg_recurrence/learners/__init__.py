"""Classical learners over RQA feature vectors and the stacking ensemble."""

from .boosting import GradientBoostedTrees, RUSBoost
from .linear import LinearSVM, MultinomialLogistic
from .metrics import EvaluationReport, evaluate, evaluate_predictions
from .split import MedianImputer, stratified_folds, stratified_split
from .stacking import StackedModel, StackingConfig

__all__ = [
    "GradientBoostedTrees", "RUSBoost", "LinearSVM", "MultinomialLogistic",
    "EvaluationReport", "evaluate", "evaluate_predictions",
    "MedianImputer", "stratified_folds", "stratified_split",
    "StackedModel", "StackingConfig",
]
