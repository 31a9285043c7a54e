"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidInputError


def check_windows(X, n_channels=None, length=None):
    """Validate a stack of sensor windows and return it as float64 ``[n, C, T]``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise InvalidInputError(f"expected windows shaped [n, channels, length], got {X.shape}")
    if len(X) == 0:
        raise InvalidInputError("no windows given")
    if n_channels is not None and X.shape[1] != n_channels:
        raise InvalidInputError(f"expected {n_channels} channels, got {X.shape[1]}")
    if length is not None and X.shape[2] != length:
        raise InvalidInputError(f"expected windows of length {length}, got {X.shape[2]}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("windows contain NaN or Inf")
    return X


def check_labels(y, classes):
    """Map labels onto 0-based indices into ``classes``; unknown labels are rejected."""
    y = np.asarray(y)
    classes = np.asarray(classes)
    idx = np.searchsorted(classes, y)
    idx = np.clip(idx, 0, len(classes) - 1)
    bad = classes[idx] != y
    if np.any(bad):
        raise InvalidInputError(f"labels {sorted(set(y[bad].tolist()))} not in {classes.tolist()}")
    return idx


def check_same_length(a, b, what="predictions and truths"):
    if len(a) != len(b):
        raise InvalidInputError(f"{what} differ in length ({len(a)} vs {len(b)})")
    if len(a) == 0:
        raise InvalidInputError(f"{what} are empty")
