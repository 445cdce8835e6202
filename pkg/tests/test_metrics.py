from fractions import Fraction

import pytest

from src.ruletree.exceptions import EvaluationError
from src.ruletree.metrics.metrics import (
    accuracy,
    balanced_accuracy,
    confusion,
    f1,
    mec,
    metric_report,
    precision,
    recall,
)

Y_TRUE = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1]
Y_PRED = [0, 0, 1, 0, 1, 1, 0, 1, 1, 0]


def test_confusion_cells():
    cm = confusion(Y_TRUE, Y_PRED)
    assert (cm.tp, cm.fn, cm.fp, cm.tn) == (4, 2, 1, 3)
    assert cm.n == 10
    assert cm.matrix == ((3, 1), (2, 4))


def test_binary_metrics_are_exact():
    cm = confusion(Y_TRUE, Y_PRED)
    assert accuracy(cm) == Fraction(7, 10)
    assert balanced_accuracy(cm) == 1 - Fraction(1, 2) * (Fraction(2, 6) + Fraction(1, 4))
    assert f1(cm) == Fraction(8, 11)
    assert precision(cm) == Fraction(4, 5)
    assert recall(cm) == Fraction(2, 3)
    assert mec(cm, 1, 5) == 11
    assert mec(cm, Fraction(1, 2), 1) == Fraction(5, 2)


def test_multiclass_accuracy():
    cm = confusion([0, 1, 2, 2], [0, 2, 2, 2])
    assert cm.n_classes == 3
    assert accuracy(cm) == Fraction(3, 4)
    with pytest.raises(EvaluationError):
        _ = cm.tp


def test_undefined_metrics_raise():
    empty = confusion([], [], n_classes=2)
    with pytest.raises(EvaluationError):
        accuracy(empty)
    no_positives = confusion([0, 0], [0, 1])
    with pytest.raises(EvaluationError):
        f1(no_positives)
    with pytest.raises(EvaluationError):
        balanced_accuracy(no_positives)
    with pytest.raises(EvaluationError):
        precision(confusion([1, 0], [0, 0]))


def test_confusion_rejects_bad_input():
    with pytest.raises(EvaluationError):
        confusion([0, 1], [0])
    with pytest.raises(EvaluationError):
        confusion([0, 3], [0, 1], n_classes=2)


def test_metric_report_marks_undefined():
    report = metric_report(confusion([0, 0], [0, 1]))
    assert report["accuracy"] == Fraction(1, 2)
    assert report["f1"] is None
    assert report["balanced_accuracy"] is None
    assert report["mec"] == 1
    multiclass = metric_report(confusion([0, 1, 2], [0, 1, 1]))
    assert multiclass["mec"] is None


def test_f1_with_explicit_positive_count():
    cm = confusion([1, 1, 0], [1, 0, 0])
    assert f1(cm, n_pos=2) == Fraction(2, 3)
