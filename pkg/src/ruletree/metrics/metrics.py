"""
Confusion matrix and the evaluation objectives, in exact rational arithmetic

The positive class is label 1. Values are Fractions; convert with float()
only when reporting.
"""
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix

from src.ruletree.exceptions import EvaluationError


@dataclass(frozen=True)
class ConfusionMatrix:
    """
    Count matrix with rows = true class and columns = predicted class

    For two classes: TP = m[1][1], FN = m[1][0], FP = m[0][1], TN = m[0][0].
    """

    matrix: Tuple[Tuple[int, ...], ...]

    @property
    def n_classes(self) -> int:
        return len(self.matrix)

    @property
    def n(self) -> int:
        return sum(sum(row) for row in self.matrix)

    def _binary(self) -> None:
        if self.n_classes != 2:
            raise EvaluationError(f"TP/FN/FP/TN are defined for two classes, not {self.n_classes}")

    @property
    def tp(self) -> int:
        self._binary()
        return self.matrix[1][1]

    @property
    def fn(self) -> int:
        self._binary()
        return self.matrix[1][0]

    @property
    def fp(self) -> int:
        self._binary()
        return self.matrix[0][1]

    @property
    def tn(self) -> int:
        self._binary()
        return self.matrix[0][0]

    @property
    def n_pos(self) -> int:
        return self.tp + self.fn

    @property
    def n_neg(self) -> int:
        return self.fp + self.tn

    @property
    def correct(self) -> int:
        return sum(self.matrix[k][k] for k in range(self.n_classes))


def confusion(y_true: Sequence[int], y_pred: Sequence[int], n_classes: Optional[int] = None) -> ConfusionMatrix:
    """
    Count predictions per (true, predicted) class pair

    Args:
        y_true: True labels
        y_pred: Predicted labels
        n_classes: Number of classes (defaults to max label + 1, at least 2)

    Returns:
        ConfusionMatrix
    """
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if len(y_true) != len(y_pred):
        raise EvaluationError(f"Length mismatch: {len(y_true)} true vs {len(y_pred)} predicted labels")
    if n_classes is None:
        top = max([1] + y_true.tolist() + y_pred.tolist())
        n_classes = top + 1
    if len(y_true) == 0:
        return ConfusionMatrix(tuple((0,) * n_classes for _ in range(n_classes)))
    if min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= n_classes:
        raise EvaluationError(f"Labels must lie in 0..{n_classes - 1}")
    counts = confusion_matrix(y_true, y_pred, labels=list(range(n_classes)))
    return ConfusionMatrix(tuple(tuple(int(v) for v in row) for row in counts))


def accuracy(cm: ConfusionMatrix) -> Fraction:
    if cm.n == 0:
        raise EvaluationError("Accuracy of an empty evaluation set is undefined")
    return Fraction(cm.correct, cm.n)


def balanced_accuracy(cm: ConfusionMatrix, n_pos: Optional[int] = None, n_neg: Optional[int] = None) -> Fraction:
    """1 - (FN/n+ + FP/n-)/2"""
    n_pos = cm.n_pos if n_pos is None else n_pos
    n_neg = cm.n_neg if n_neg is None else n_neg
    if n_pos <= 0 or n_neg <= 0:
        raise EvaluationError("Balanced accuracy needs both positive and negative samples")
    return 1 - Fraction(1, 2) * (Fraction(cm.fn, n_pos) + Fraction(cm.fp, n_neg))


def f1(cm: ConfusionMatrix, n_pos: Optional[int] = None) -> Fraction:
    """2(n+ - FN) / (2n+ - FN + FP)"""
    n_pos = cm.n_pos if n_pos is None else n_pos
    if n_pos <= 0:
        raise EvaluationError("F1 needs at least one positive sample")
    return Fraction(2 * (n_pos - cm.fn), 2 * n_pos - cm.fn + cm.fp)


def mec(cm: ConfusionMatrix, cost_fp, cost_fn) -> Fraction:
    """Misclassification error cost C_FP * FP + C_FN * FN"""
    return Fraction(cost_fp) * cm.fp + Fraction(cost_fn) * cm.fn


def precision(cm: ConfusionMatrix) -> Fraction:
    if cm.tp + cm.fp == 0:
        raise EvaluationError("Precision undefined without positive predictions")
    return Fraction(cm.tp, cm.tp + cm.fp)


def recall(cm: ConfusionMatrix) -> Fraction:
    if cm.n_pos == 0:
        raise EvaluationError("Recall undefined without positive samples")
    return Fraction(cm.tp, cm.n_pos)


def metric_report(cm: ConfusionMatrix, costs: Optional[Tuple[Fraction, Fraction]] = None) -> Dict[str, Optional[Fraction]]:
    """All metrics that are defined on cm; undefined ones map to None"""
    report: Dict[str, Optional[Fraction]] = {"accuracy": None, "balanced_accuracy": None, "f1": None, "mec": None}
    if cm.n:
        report["accuracy"] = accuracy(cm)
    if cm.n_classes != 2:
        return report
    for name, fn in (("balanced_accuracy", balanced_accuracy), ("f1", f1)):
        try:
            report[name] = fn(cm)
        except EvaluationError:
            report[name] = None
    cost_fp, cost_fn = costs if costs is not None else (Fraction(1), Fraction(1))
    report["mec"] = mec(cm, cost_fp, cost_fn)
    return report
