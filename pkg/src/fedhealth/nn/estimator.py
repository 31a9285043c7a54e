from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..validation import check_labels, check_windows
from .model import init_params, har_architecture, predict_proba
from .optim import train


class CNNClassifier(ClassifierMixin, BaseEstimator):
    """Scikit-learn wrapper around the activity CNN.

    ``X`` is a stack of sensor windows ``[n, channels, length]``. Passing
    ``init_params`` starts from an existing :class:`ModelParams` (e.g. a
    received cloud model) instead of a fresh seeded initialization. Fixing
    ``classes`` keeps the output layer aligned with a global label set even if
    a client's data lacks some activity.
    """

    def __init__(
        self,
        conv_channels=(32, 64),
        kernel_size=9,
        pool_size=2,
        hidden=(128, 64),
        epochs=80,
        batch_size=64,
        learning_rate=0.01,
        classes=None,
        init_params=None,
        random_state=0,
    ):
        self.conv_channels = conv_channels
        self.kernel_size = kernel_size
        self.pool_size = pool_size
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.classes = classes
        self.init_params = init_params
        self.random_state = random_state

    def _seeds(self):
        ss = np.random.SeedSequence(self.random_state)
        init_ss, shuffle_ss = ss.spawn(2)
        return int(init_ss.generate_state(1)[0]), int(shuffle_ss.generate_state(1)[0])

    def fit(self, X, y):
        X = check_windows(X)
        self.classes_ = np.asarray(self.classes) if self.classes is not None else np.unique(y)
        y_idx = check_labels(y, self.classes_)
        init_seed, shuffle_seed = self._seeds()
        if self.init_params is not None:
            params = self.init_params
        else:
            specs = har_architecture(
                n_channels=X.shape[1],
                length=X.shape[2],
                n_classes=len(self.classes_),
                conv_channels=self.conv_channels,
                kernel_size=self.kernel_size,
                pool_size=self.pool_size,
                hidden=self.hidden,
            )
            params = init_params(specs, X.shape[1:], seed=init_seed)
        result = train(
            params,
            X,
            y_idx,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=shuffle_seed,
        )
        self.params_ = result.params
        self.loss_curve_ = result.loss_trace
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return predict_proba(self.params_, check_windows(X))

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
