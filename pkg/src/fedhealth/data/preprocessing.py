from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..validation import check_windows
from .har import NormStats, apply_stats, compute_stats


class ChannelStandardizer(TransformerMixin, BaseEstimator):
    """Per-channel z-scoring of ``[n, channels, length]`` windows.

    Pass ``stats`` to reuse statistics fitted elsewhere (clients reuse the
    cloud's statistics and never compute their own).
    """

    def __init__(self, stats: NormStats | None = None):
        self.stats = stats

    def fit(self, X, y=None):
        X = check_windows(X)
        self.stats_ = self.stats if self.stats is not None else compute_stats(X)
        self.mean_ = self.stats_.mean
        self.scale_ = self.stats_.std
        return self

    def transform(self, X):
        check_is_fitted(self, "stats_")
        return apply_stats(check_windows(X, n_channels=len(self.mean_)), self.stats_)

    def inverse_transform(self, X):
        check_is_fitted(self, "stats_")
        return check_windows(X) * self.scale_[:, None] + self.mean_[:, None]
