from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidInputError
from ..validation import check_same_length


def accuracy(predictions, truths):
    """Fraction of exact label matches."""
    check_same_length(predictions, truths)
    return float(np.mean(np.asarray(predictions) == np.asarray(truths)))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    counts: np.ndarray
    labels: tuple

    @property
    def total(self):
        return int(self.counts.sum())

    def accuracy(self):
        return float(np.trace(self.counts) / self.total)

    def row_normalized(self):
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("true\\pred," + ",".join(str(label) for label in self.labels) + "\n")
        for label, row in zip(self.labels, self.counts):
            buf.write(f"{label}," + ",".join(str(int(v)) for v in row) + "\n")
        return buf.getvalue()


@dataclass(frozen=True)
class ClassificationReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    # (metric, class label) pairs where a zero denominator was replaced by 0
    zero_division: tuple = ()

    @property
    def macro_precision(self):
        return float(self.precision.mean())

    @property
    def macro_recall(self):
        return float(self.recall.mean())

    @property
    def macro_f1(self):
        return float(self.f1.mean())


def _ratio(num, den, metric, labels, flags):
    out = np.zeros(len(num))
    for i, (a, b) in enumerate(zip(num, den)):
        if b == 0:
            flags.append((metric, labels[i]))
        else:
            out[i] = a / b
    return out


def confusion_and_prf(predictions, truths, num_classes=6):
    """Confusion matrix over labels ``1..num_classes`` plus per-class and macro P/R/F1."""
    check_same_length(predictions, truths)
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(truths, dtype=np.int64)
    for arr in (pred, true):
        if arr.min() < 1 or arr.max() > num_classes:
            raise InvalidInputError(f"labels must lie in [1, {num_classes}]")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (true - 1, pred - 1), 1)
    labels = tuple(range(1, num_classes + 1))
    tp = np.diag(counts)
    flags = []
    precision = _ratio(tp, counts.sum(axis=0), "precision", labels, flags)
    recall = _ratio(tp, counts.sum(axis=1), "recall", labels, flags)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", labels, flags)
    report = ClassificationReport(precision, recall, f1, counts.sum(axis=1), tuple(flags))
    return ConfusionMatrix(counts, labels), report
