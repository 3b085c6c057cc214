"""Confusion matrix, per-class precision/recall/F1 and the results table."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyInputError


@dataclass
class EvaluationReport:
    class_names: tuple
    confusion: np.ndarray  # rows: true class, columns: predicted class
    precision: np.ndarray  # NaN where undefined (0/0)
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float
    model_name: str = ""

    @property
    def support(self):
        return self.confusion.sum(axis=1)

    def defined(self, metric: str) -> np.ndarray:
        return ~np.isnan(getattr(self, metric))

    def to_text(self) -> str:
        """Results table: model, class, precision, recall, F1-score, accuracy.

        Undefined metrics print as ``undef``; accuracy appears on the middle row.
        """
        def fmt(v):
            return "undef" if np.isnan(v) else f"{v:.2f}"

        head = f"{'Model':<20} {'Class':<6} {'Precision':>9} {'Recall':>7} {'F1-score':>8} {'Accuracy':>9}"
        lines = [head, "-" * len(head)]
        mid = len(self.class_names) // 2
        for i, name in enumerate(self.class_names):
            model = self.model_name if i == 0 else ""
            acc = f"{100 * self.accuracy:.2f}%" if i == mid else ""
            lines.append(f"{model:<20} {name:<6} {fmt(self.precision[i]):>9} "
                         f"{fmt(self.recall[i]):>7} {fmt(self.f1[i]):>8} {acc:>9}")
        return "\n".join(lines) + "\n"

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *self.class_names])
        for name, row in zip(self.class_names, self.confusion):
            w.writerow([name, *(int(v) for v in row)])
        return buf.getvalue()

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "precision", "recall", "f1", "support", "flags"])
        for i, name in enumerate(self.class_names):
            flags = ";".join(m for m in ("precision", "recall", "f1") if np.isnan(getattr(self, m)[i]))
            vals = ["" if np.isnan(v) else f"{v:.6f}"
                    for v in (self.precision[i], self.recall[i], self.f1[i])]
            w.writerow([name, *vals, int(self.support[i]), flags or "ok"])
        w.writerow(["accuracy", "", "", f"{self.accuracy:.6f}", int(self.confusion.sum()), "ok"])
        return buf.getvalue()


def evaluate_predictions(y_true, y_pred, class_names, model_name: str = "") -> EvaluationReport:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if len(y_true) == 0:
        raise EmptyInputError("cannot evaluate on an empty test set")
    if y_true.shape != y_pred.shape:
        raise ValueError(f"label/prediction length mismatch {y_true.shape} vs {y_pred.shape}")
    k = len(class_names)
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    tp = np.diag(conf).astype(np.float64)
    pred_pos, actual = conf.sum(axis=0), conf.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_pos > 0, tp / pred_pos, np.nan)
        recall = np.where(actual > 0, tp / actual, np.nan)
        denom = precision + recall
        f1 = np.where(np.isnan(denom), np.nan,
                      np.where(denom > 0, 2 * precision * recall / denom, 0.0))
    accuracy = float(np.trace(conf) / conf.sum())
    return EvaluationReport(tuple(class_names), conf, precision, recall, f1, accuracy, model_name)


def evaluate(model, X, y_true, class_names, model_name: str = "") -> EvaluationReport:
    return evaluate_predictions(y_true, model.predict(X), class_names, model_name)
