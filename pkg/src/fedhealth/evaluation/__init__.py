"""Accuracy, confusion matrices, macro P/R/F1 and the KNN baseline."""

from .knn import DEFAULT_CANDIDATES, KNNWindowClassifier, knn_baseline, select_k
from .metrics import ClassificationReport, ConfusionMatrix, accuracy, confusion_and_prf

__all__ = [
    "DEFAULT_CANDIDATES",
    "ClassificationReport",
    "ConfusionMatrix",
    "KNNWindowClassifier",
    "accuracy",
    "confusion_and_prf",
    "knn_baseline",
    "select_k",
]
