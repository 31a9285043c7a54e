"""UCI HAR ingestion, subject partitioning, splitting and normalization."""

from .har import (
    ACTIVITIES,
    CHANNELS,
    LABELS,
    HarDataset,
    NormStats,
    SampleWindow,
    compute_stats,
    load_har,
    merge,
    normalize,
    partition_by_subject,
    train_eval_split,
)
from .preprocessing import ChannelStandardizer
from .synthetic import make_synthetic_har, write_uci_layout

__all__ = [
    "ACTIVITIES",
    "CHANNELS",
    "LABELS",
    "ChannelStandardizer",
    "HarDataset",
    "NormStats",
    "SampleWindow",
    "compute_stats",
    "load_har",
    "make_synthetic_har",
    "merge",
    "normalize",
    "partition_by_subject",
    "train_eval_split",
    "write_uci_layout",
]
