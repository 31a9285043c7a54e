"""Alignment penalties between a user's alignment-layer weights and the frozen server copy."""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidInputError


def covariance(X):
    """Sample covariance of the rows of ``X [n, d]`` (``n - 1`` denominator)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError(f"expected a 2-d matrix, got shape {X.shape}")
    n = X.shape[0]
    if n < 2:
        raise InvalidInputError("covariance needs at least two rows")
    s = X.sum(axis=0)
    return (X.T @ X - np.outer(s, s) / n) / (n - 1)


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape:
        raise InvalidInputError(f"alignment operands must be equal-shape matrices, got {a.shape} and {b.shape}")
    return a, b


def coral_loss(W_user, W_ref):
    """``||C_ref - C_user||_F^2 / (4 d^2)`` over row covariances; ``d`` is the column count."""
    W_user, W_ref = _check_pair(W_user, W_ref)
    d = W_user.shape[1]
    diff = covariance(W_user) - covariance(W_ref)
    return float(np.sum(diff * diff) / (4.0 * d * d))


def coral_grad(W_user, W_ref):
    """Gradient of :func:`coral_loss` w.r.t. ``W_user``."""
    W_user, W_ref = _check_pair(W_user, W_ref)
    n, d = W_user.shape
    diff = covariance(W_user) - covariance(W_ref)
    centered = W_user - W_user.mean(axis=0)
    return centered @ diff / (d * d * (n - 1))


def mmd_loss(F_user, F_ref):
    """Linear MMD: squared distance between the row means."""
    F_user = np.asarray(F_user, dtype=np.float64)
    F_ref = np.asarray(F_ref, dtype=np.float64)
    if F_user.ndim != 2 or F_ref.ndim != 2 or F_user.shape[1] != F_ref.shape[1]:
        raise InvalidInputError(f"incompatible shapes {F_user.shape} and {F_ref.shape}")
    if len(F_user) == 0 or len(F_ref) == 0:
        raise InvalidInputError("mmd needs at least one row on each side")
    delta = F_user.mean(axis=0) - F_ref.mean(axis=0)
    return float(delta @ delta)


def mmd_grad(F_user, F_ref):
    """Gradient of :func:`mmd_loss` w.r.t. ``F_user``."""
    F_user = np.asarray(F_user, dtype=np.float64)
    delta = F_user.mean(axis=0) - np.asarray(F_ref, dtype=np.float64).mean(axis=0)
    return np.broadcast_to(2.0 * delta / len(F_user), F_user.shape).copy()


VARIANTS = ("coral", "mmd", "finetune")


class AlignmentPenalty:
    """``eta`` times the variant's loss on one alignment layer, for use during training.

    Layer weights are stored ``[out, in]``; the penalty sees their transpose so
    that rows are input units and ``d`` is the layer's output width.
    """

    def __init__(self, eta=0.01, variant="coral", layer="alignment"):
        if variant not in VARIANTS:
            raise InvalidInputError(f"variant must be one of {VARIANTS}, got {variant!r}")
        if eta < 0:
            raise InvalidInputError("eta must be non-negative")
        self.eta = eta
        self.variant = variant
        self.layer = layer

    def __call__(self, params):
        if self.variant == "finetune":
            return 0.0, {}
        w, b = params.tensors[self.layer]
        ref = params.references[self.layer]
        if self.variant == "coral":
            value, grad = coral_loss(w.T, ref.T), coral_grad(w.T, ref.T)
        else:
            value, grad = mmd_loss(w.T, ref.T), mmd_grad(w.T, ref.T)
        return self.eta * value, {self.layer: (self.eta * grad.T, np.zeros_like(b))}
