"""Finite-difference verification of every analytic gradient in the engine.

Relative error of a check is ``||g_analytic - g_numeric|| / (||g_analytic|| + ||g_numeric||)``
with central differences of step ``eps``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import layers as L
from .nn.model import init_params, loss_and_gradients, har_architecture
from .transfer.alignment import AlignmentPenalty, coral_grad, coral_loss, mmd_grad, mmd_loss
from .transfer.personalize import ALIGNMENT_LAYER, build_personalized

TOLERANCE = 1e-4
EPS = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    rel_error: float
    tolerance: float = TOLERANCE

    @property
    def passed(self):
        return bool(self.rel_error < self.tolerance)

    def __str__(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name:<48} rel_error={self.rel_error:.2e}"


def numeric_gradient(f, x, eps=EPS):
    """Central differences of scalar ``f`` at array ``x`` (``x`` is perturbed in place and restored)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        up = f()
        x[i] = old - eps
        down = f()
        x[i] = old
        grad[i] = (up - down) / (2 * eps)
    return grad


def relative_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / denom) if denom > 0 else 0.0


def _conv_checks(rng, stride):
    x = rng.normal(size=(2, 3, 13))
    w = rng.normal(size=(4, 3, 3))
    b = rng.normal(size=4)
    g = rng.normal(size=L.conv1d_forward(x, w, b, stride).shape)
    f = lambda: float(np.sum(L.conv1d_forward(x, w, b, stride) * g))  # noqa: E731
    dx, dw, db = L.conv1d_backward(g, x, w, stride)
    tag = f"conv1d(stride={stride})"
    return [
        CheckResult(f"{tag} input", relative_error(dx, numeric_gradient(f, x))),
        CheckResult(f"{tag} weight", relative_error(dw, numeric_gradient(f, w))),
        CheckResult(f"{tag} bias", relative_error(db, numeric_gradient(f, b))),
    ]


def _pool_check(rng, window, stride):
    # continuous random input keeps every window's maximum unique and away from ties
    x = rng.normal(size=(2, 3, 12))
    out, arg = L.maxpool1d_forward(x, window, stride)
    g = rng.normal(size=out.shape)
    f = lambda: float(np.sum(L.maxpool1d_forward(x, window, stride)[0] * g))  # noqa: E731
    dx = L.maxpool1d_backward(g, arg, x.shape[2], window, stride)
    return CheckResult(f"maxpool1d(window={window},stride={stride}) input", relative_error(dx, numeric_gradient(f, x)))


def _fc_checks(rng):
    x = rng.normal(size=(5, 7))
    w = rng.normal(size=(4, 7))
    b = rng.normal(size=4)
    g = rng.normal(size=(5, 4))
    f = lambda: float(np.sum(L.fc_forward(x, w, b) * g))  # noqa: E731
    dx, dw, db = L.fc_backward(g, x, w)
    return [
        CheckResult("fc input", relative_error(dx, numeric_gradient(f, x))),
        CheckResult("fc weight", relative_error(dw, numeric_gradient(f, w))),
        CheckResult("fc bias", relative_error(db, numeric_gradient(f, b))),
    ]


def _ce_check(rng):
    logits = rng.normal(size=(6, 5)) * 3
    labels = rng.integers(0, 5, size=6)
    _, grad = L.softmax_cross_entropy(logits.copy(), labels)
    f = lambda: L.softmax_cross_entropy(logits, labels)[0]  # noqa: E731
    return CheckResult("softmax cross-entropy logits", relative_error(grad, numeric_gradient(f, logits)))


def _small_model(seed):
    specs = har_architecture(n_channels=3, length=24, n_classes=4, conv_channels=(4, 5), kernel_size=3, hidden=(6, 5))
    return init_params(specs, (3, 24), seed=seed)


def _model_checks(params, x, y, penalty, tag):
    _, grads = loss_and_gradients(params, x, y, penalty)
    out = []
    for name, (gw, gb) in grads.items():
        w, b = (t.copy() for t in params.tensors[name])

        def f():
            return loss_and_gradients(params.with_tensors({name: (w, b)}), x, y, penalty)[0]

        out.append(CheckResult(f"{tag} {name} weight", relative_error(gw, numeric_gradient(f, w))))
        out.append(CheckResult(f"{tag} {name} bias", relative_error(gb, numeric_gradient(f, b))))
    return out


def _alignment_checks(rng):
    a = rng.normal(size=(7, 4))
    ref = rng.normal(size=(7, 4))
    return [
        CheckResult("coral loss", relative_error(coral_grad(a, ref), numeric_gradient(lambda: coral_loss(a, ref), a))),
        CheckResult("linear mmd loss", relative_error(mmd_grad(a, ref), numeric_gradient(lambda: mmd_loss(a, ref), a))),
    ]


def run_suite(seed=0):
    """Run every check; returns a list of :class:`CheckResult`."""
    rng = np.random.default_rng(seed)
    results = []
    results += _conv_checks(rng, 1)
    results += _conv_checks(rng, 2)
    results.append(_pool_check(rng, 2, 2))
    results.append(_pool_check(rng, 3, 2))
    results += _fc_checks(rng)
    results.append(_ce_check(rng))
    results += _alignment_checks(rng)

    params = _small_model(seed)
    x = rng.normal(size=(4, 3, 24))
    y = rng.integers(0, 4, size=4)
    results += _model_checks(params, x, y, None, "network")

    # personalized objective: cross-entropy plus eta * CORAL on the alignment layer,
    # with the alignment weights moved off the reference so the penalty is active
    pers = build_personalized(params)
    w, b = pers.tensors[ALIGNMENT_LAYER]
    pers = pers.with_tensors({ALIGNMENT_LAYER: (w + 0.3 * rng.normal(size=w.shape), b)})
    results += _model_checks(pers, x, y, AlignmentPenalty(0.01, "coral"), "objective(coral, eta=0.01)")
    results += _model_checks(pers, x, y, AlignmentPenalty(0.01, "mmd"), "objective(mmd, eta=0.01)")
    # at eta = 1 the penalty dominates, so an error in its gradient cannot hide behind cross-entropy
    results += _model_checks(pers, x, y, AlignmentPenalty(1.0, "coral"), "objective(coral, eta=1)")
    return results
