"""k-nearest-neighbour baseline on flattened, z-scored windows."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import GridSearchCV, StratifiedKFold
from sklearn.utils.validation import check_is_fitted

from ..exceptions import InvalidInputError

DEFAULT_CANDIDATES = (1, 3, 5, 7, 9, 11, 15, 21)


def _flatten(X):
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(len(X), -1)


class KNNWindowClassifier(ClassifierMixin, BaseEstimator):
    """Euclidean k-NN with majority vote.

    Ties between classes are broken in favour of the tied class whose member
    is closest to the query. Neighbours at equal distance are ordered by
    training index, so predictions are fully deterministic.
    """

    def __init__(self, n_neighbors=5, batch_size=256):
        self.n_neighbors = n_neighbors
        self.batch_size = batch_size

    def fit(self, X, y):
        X = _flatten(X)
        if len(X) == 0:
            raise InvalidInputError("KNN needs a non-empty training set")
        if self.n_neighbors < 1:
            raise InvalidInputError("n_neighbors must be >= 1")
        if self.n_neighbors > len(X):
            raise InvalidInputError(f"k = {self.n_neighbors} exceeds the {len(X)} training samples")
        self.X_ = X
        self.y_ = np.asarray(y)
        self.classes_ = np.unique(self.y_)
        self._sq = np.einsum("ij,ij->i", X, X)
        return self

    def kneighbors(self, X):
        check_is_fitted(self, "X_")
        X = _flatten(X)
        k = self.n_neighbors
        out = []
        for i in range(0, len(X), self.batch_size):
            q = X[i:i + self.batch_size]
            d2 = np.einsum("ij,ij->i", q, q)[:, None] + self._sq[None, :] - 2.0 * q @ self.X_.T
            np.maximum(d2, 0.0, out=d2)
            out.append(np.argsort(d2, axis=1, kind="stable")[:, :k])
        return np.concatenate(out)

    def predict(self, X):
        neighbors = self.kneighbors(X)
        return np.array([_vote(self.y_[row]) for row in neighbors])


def _vote(labels):
    values, counts = np.unique(labels, return_counts=True)
    tied = set(values[counts == counts.max()].tolist())
    for label in labels:  # ordered nearest first
        if label in tied:
            return label
    raise AssertionError("unreachable")


def select_k(X, y, candidates=DEFAULT_CANDIDATES, cv=5, seed=0):
    """Choose k by stratified cross-validated accuracy (smallest k wins ties)."""
    y = np.asarray(y)
    n_splits = int(min(cv, np.bincount(np.unique(y, return_inverse=True)[1]).min()))
    if n_splits < 2:
        return int(min(candidates))
    fold_train = len(y) - int(np.ceil(len(y) / n_splits))
    ks = [k for k in sorted(candidates) if k <= fold_train]
    if len(ks) == 1:
        return ks[0]
    search = GridSearchCV(
        KNNWindowClassifier(),
        {"n_neighbors": ks},
        cv=StratifiedKFold(n_splits=n_splits, shuffle=True, random_state=seed),
        scoring="accuracy",
    )
    search.fit(_flatten(X), y)
    return int(search.best_params_["n_neighbors"])


def knn_baseline(train, test, k=None, candidates=DEFAULT_CANDIDATES, cv=5, seed=0):
    """Fit on ``train`` (a HarDataset) and predict ``test``. Returns ``(predictions, k)``."""
    if len(train) == 0:
        raise InvalidInputError("KNN needs a non-empty training set")
    if k is None:
        k = select_k(train.X, train.y, candidates, cv, seed)
    model = KNNWindowClassifier(n_neighbors=k).fit(train.X, train.y)
    return model.predict(test.X), k
