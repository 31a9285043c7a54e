"""Plain mini-batch SGD with frozen-layer support."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidInputError
from . import layers as L
from .model import ModelParams, add_penalty, backward, check_input, forward

logger = logging.getLogger(__name__)


def sgd_step(params: ModelParams, grads, learning_rate) -> ModelParams:
    """Return params with ``-learning_rate * grad`` applied to every non-frozen layer.

    Frozen layers keep their original arrays, so they stay bit-identical.
    """
    if learning_rate == 0 or not grads:
        return params
    updated = {}
    for name, (dw, db) in grads.items():
        if params.spec(name).frozen:
            continue
        w, b = params.tensors[name]
        updated[name] = (w - learning_rate * dw, b - learning_rate * db)
    return params.with_tensors(updated)


@dataclass
class TrainResult:
    params: ModelParams
    loss_trace: list


def _frozen_prefix(params):
    # leading layers that are all frozen (or parameter-free and sandwiched between frozen ones)
    n = 0
    for i, spec in enumerate(params.specs):
        if spec.frozen:
            n = i + 1
        elif spec.has_params:
            break
    return n


def train(
    params: ModelParams,
    X,
    y,
    *,
    epochs=80,
    batch_size=64,
    learning_rate=0.01,
    seed=0,
    penalty=None,
) -> TrainResult:
    """Mini-batch SGD on mean cross-entropy (plus an optional penalty per batch).

    ``y`` holds 0-based class indices. Samples are reshuffled every epoch from a
    generator seeded with ``seed``; the loss trace records the mean batch loss
    of each epoch. Outputs of a leading block of frozen layers are computed once
    and reused, since those layers never change.
    """
    X = check_input(params, X)
    y = np.asarray(y)
    n = len(X)
    if n == 0:
        raise InvalidInputError("cannot train on an empty dataset")
    if len(y) != n:
        raise InvalidInputError(f"{len(y)} labels for {n} samples")
    if epochs < 0 or batch_size < 1 or learning_rate < 0:
        raise InvalidInputError("epochs must be >= 0, batch_size >= 1 and learning_rate >= 0")

    start = _frozen_prefix(params)
    if start and epochs:
        feats = np.concatenate([forward(params, X[i:i + 512], stop=start) for i in range(0, n, 512)])
    else:
        feats = X
    rng = np.random.default_rng(seed)
    trace = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        losses = []
        for i in range(0, n, batch_size):
            idx = order[i:i + batch_size]
            cache = []
            logits = forward(params, feats[idx], start=start, cache=cache)
            loss, dlogits = L.softmax_cross_entropy(logits, y[idx])
            grads = backward(params, cache, dlogits, start=start)
            if penalty is not None:
                loss = add_penalty(params, grads, penalty, loss)
            params = sgd_step(params, grads, learning_rate)
            losses.append(loss)
        trace.append(float(np.mean(losses)))
        logger.debug("epoch %d/%d loss %.5f", epoch + 1, epochs, trace[-1])
    return TrainResult(params, trace)
