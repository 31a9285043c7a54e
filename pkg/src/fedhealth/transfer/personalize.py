"""Per-client personalization of a received cloud model."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConfigurationError, InvalidInputError
from ..nn.model import ALIGN, CONV, FC, POOL, ModelParams, predict_proba
from ..nn.optim import train
from ..validation import check_labels, check_windows
from .alignment import VARIANTS, AlignmentPenalty

CANONICAL = (("conv1", CONV), ("pool1", POOL), ("conv2", CONV), ("pool2", POOL), ("fc1", FC), ("fc2", FC), ("output", FC))
FROZEN_LAYERS = ("conv1", "pool1", "conv2", "pool2", "fc1")
ALIGNMENT_LAYER = "alignment"


@dataclass(frozen=True)
class TransferConfig:
    eta: float = 0.01
    variant: str = "coral"
    epochs: int = 80
    batch_size: int = 64
    learning_rate: float = 0.01

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.eta < 0:
            raise ConfigurationError("eta must be non-negative")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate < 0:
            raise ConfigurationError("invalid personalization hyperparameters")

    def penalty(self):
        return AlignmentPenalty(self.eta, self.variant, ALIGNMENT_LAYER)


def build_personalized(server_model: ModelParams) -> ModelParams:
    """Freeze the feature extractor and swap fc2 for an alignment layer.

    The alignment layer starts as an exact copy of the server's fc2 and keeps a
    frozen reference copy of those weights, so the new model computes the same
    function as the server model until it is trained.
    """
    got = tuple((s.name, s.kind) for s in server_model.specs)
    if got != CANONICAL:
        raise ConfigurationError(f"expected the conv1..output architecture, got {[n for n, _ in got]}")
    specs, tensors = [], {}
    for spec in server_model.specs:
        if spec.name == "fc2":
            spec = replace(spec, name=ALIGNMENT_LAYER, kind=ALIGN)
            tensors[ALIGNMENT_LAYER] = server_model.tensors["fc2"]
        elif spec.has_params:
            tensors[spec.name] = server_model.tensors[spec.name]
        specs.append(replace(spec, frozen=spec.name in FROZEN_LAYERS))
    refs = {ALIGNMENT_LAYER: server_model.tensors["fc2"][0]}
    return ModelParams(tuple(specs), server_model.input_shape, tensors, refs)


def personalize(X, y_idx, server_model: ModelParams, config: TransferConfig = TransferConfig(), seed=0):
    """Train the personalized model on client data; ``y_idx`` holds 0-based class indices.

    Returns ``(params, loss_trace)``. Loss per batch is mean cross-entropy plus
    ``eta`` times the variant's alignment penalty.
    """
    if len(X) == 0:
        raise InvalidInputError("client training split is empty")
    model = build_personalized(server_model)
    result = train(
        model,
        X,
        y_idx,
        epochs=config.epochs,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        seed=seed,
        penalty=config.penalty(),
    )
    return result.params, result.loss_trace


class Personalizer(ClassifierMixin, BaseEstimator):
    """Estimator form of :func:`personalize`.

    ``server_model`` must be fitted on the same label set given in ``classes``.
    """

    def __init__(
        self,
        server_model=None,
        classes=(1, 2, 3, 4, 5, 6),
        eta=0.01,
        variant="coral",
        epochs=80,
        batch_size=64,
        learning_rate=0.01,
        random_state=0,
    ):
        self.server_model = server_model
        self.classes = classes
        self.eta = eta
        self.variant = variant
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y):
        if self.server_model is None:
            raise ConfigurationError("Personalizer needs a server_model")
        X = check_windows(X)
        self.classes_ = np.asarray(self.classes)
        config = TransferConfig(self.eta, self.variant, self.epochs, self.batch_size, self.learning_rate)
        self.params_, self.loss_curve_ = personalize(
            X, check_labels(y, self.classes_), self.server_model, config, seed=self.random_state
        )
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return predict_proba(self.params_, check_windows(X))

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
