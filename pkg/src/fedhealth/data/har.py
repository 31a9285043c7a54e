"""UCI Smartphone HAR windows: loading, subject partitioning, splitting, z-scoring."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..exceptions import IntegrityError, InvalidInputError, LoadError, StratificationError

logger = logging.getLogger(__name__)

ACTIVITIES = ("WALKING", "WALKING_UPSTAIRS", "WALKING_DOWNSTAIRS", "SITTING", "STANDING", "LAYING")
LABELS = np.arange(1, 7)
N_SUBJECTS = 30
WINDOW_LENGTH = 128

# fixed channel order of every window
SIGNALS = ("body_acc", "body_gyro", "total_acc")
AXES = ("x", "y", "z")
CHANNELS = tuple(f"{s}_{a}" for s in SIGNALS for a in AXES)


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and standard deviation used for z-scoring.

    ``degenerate`` lists channels whose std was zero and was replaced by 1.
    """

    mean: np.ndarray
    std: np.ndarray
    degenerate: tuple = ()

    def __post_init__(self):
        for name in ("mean", "std"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "degenerate", tuple(int(c) for c in self.degenerate))

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "degenerate": list(self.degenerate)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"]), np.asarray(d["std"]), tuple(d.get("degenerate", ())))


@dataclass(frozen=True)
class SampleWindow:
    signals: np.ndarray
    label: int
    subject_id: int


@dataclass(frozen=True)
class HarDataset:
    """Labelled windows ``X [n, 9, 128]`` with activity labels 1..6 and subject ids.

    Arrays are read-only; every operation returns a new dataset.
    """

    X: np.ndarray
    y: np.ndarray
    subjects: np.ndarray
    stats: NormStats | None = None
    flags: tuple = field(default=())

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.int64)
        s = np.array(self.subjects, dtype=np.int64)
        if X.ndim != 3 or len(X) != len(y) or len(y) != len(s):
            raise InvalidInputError(f"inconsistent dataset arrays: X {X.shape}, y {y.shape}, subjects {s.shape}")
        for a in (X, y, s):
            a.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "subjects", s)

    def __len__(self):
        return len(self.y)

    def __getitem__(self, i):
        return SampleWindow(self.X[i], int(self.y[i]), int(self.subjects[i]))

    @property
    def subject_ids(self):
        return sorted(set(self.subjects.tolist()))

    def subset(self, idx, flags=()):
        return HarDataset(self.X[idx], self.y[idx], self.subjects[idx], self.stats, self.flags + tuple(flags))

    def class_counts(self):
        return {int(c): int((self.y == c).sum()) for c in LABELS}


def merge(*datasets):
    """Concatenate datasets (stats are kept only if all inputs share them)."""
    if not datasets:
        raise InvalidInputError("nothing to merge")
    stats = datasets[0].stats
    if any(d.stats is not stats for d in datasets[1:]):
        stats = None
    return HarDataset(
        np.concatenate([d.X for d in datasets]),
        np.concatenate([d.y for d in datasets]),
        np.concatenate([d.subjects for d in datasets]),
        stats,
    )


# ----------------------------------------------------------------------------
# loading
# ----------------------------------------------------------------------------


def _read_table(path, n_cols=None):
    if not path.is_file():
        raise LoadError(f"missing dataset file: {path}")
    if path.stat().st_size == 0:
        return np.zeros((0, n_cols or 0))
    try:
        table = pd.read_csv(path, sep=r"\s+", header=None, dtype=np.float64, engine="c").to_numpy()
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IntegrityError(f"cannot parse {path}: {exc}") from exc
    if n_cols is not None and table.shape[1] != n_cols:
        raise IntegrityError(f"{path} has {table.shape[1]} columns, expected {n_cols}")
    return table


def _read_ints(path, lo, hi, what):
    col = _read_table(path, 1)[:, 0]
    if col.size and (not np.all(col == np.round(col)) or col.min() < lo or col.max() > hi):
        raise IntegrityError(f"{path}: {what} must be integers in [{lo}, {hi}]")
    return col.astype(np.int64)


def _load_part(root, part):
    base = root / part
    y = _read_ints(base / f"y_{part}.txt", 1, 6, "labels")
    subjects = _read_ints(base / f"subject_{part}.txt", 1, N_SUBJECTS, "subject ids")
    if len(y) != len(subjects):
        raise IntegrityError(f"{part}: {len(y)} labels but {len(subjects)} subject ids")
    channels = []
    for name in CHANNELS:
        path = base / "Inertial Signals" / f"{name}_{part}.txt"
        table = _read_table(path, WINDOW_LENGTH)
        if len(table) != len(y):
            raise IntegrityError(f"{path} has {len(table)} rows but y_{part}.txt has {len(y)}")
        channels.append(table)
    X = np.stack(channels, axis=1)
    if not np.all(np.isfinite(X)):
        raise IntegrityError(f"{part}: non-finite signal values")
    return X, y, subjects


def load_har(root) -> HarDataset:
    """Load the UCI HAR directory, merging its train and test parts.

    Channels are ordered body_acc x/y/z, body_gyro x/y/z, total_acc x/y/z.
    Train rows come first, then test rows, each in file order.
    """
    root = Path(root)
    parts = [_load_part(root, part) for part in ("train", "test")]
    X = np.concatenate([p[0] for p in parts])
    y = np.concatenate([p[1] for p in parts])
    s = np.concatenate([p[2] for p in parts])
    logger.info("loaded %d windows from %s", len(y), root)
    return HarDataset(X, y, s)


# ----------------------------------------------------------------------------
# partitioning and splitting
# ----------------------------------------------------------------------------


def partition_by_subject(ds: HarDataset, ids):
    """Split into (windows of the given subjects, everything else)."""
    ids = set(int(i) for i in ids)
    if not ids:
        raise InvalidInputError("subject id set is empty")
    if not ids <= set(range(1, N_SUBJECTS + 1)):
        raise InvalidInputError(f"subject ids must lie in [1, {N_SUBJECTS}]")
    mask = np.isin(ds.subjects, sorted(ids))
    inside, rest = ds.subset(mask), ds.subset(~mask)
    if len(rest) == 0:
        warnings.warn("partition complement is empty", stacklevel=2)
        rest = rest.subset(slice(None), flags=("empty_complement",))
    return inside, rest


def train_eval_split(ds: HarDataset, ratio=0.7, seed=0):
    """Stratified split; each class contributes ``round(ratio * n_c)`` windows to the first part."""
    if not 0 < ratio < 1:
        raise InvalidInputError("ratio must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    first, second = [], []
    for c in np.unique(ds.y):
        idx = np.flatnonzero(ds.y == c)
        if len(idx) < 2:
            raise StratificationError(f"class {c} has {len(idx)} sample(s); need at least 2 to stratify")
        idx = rng.permutation(idx)
        k = min(max(int(np.floor(ratio * len(idx) + 0.5)), 1), len(idx) - 1)
        first.append(idx[:k])
        second.append(idx[k:])
    first = np.sort(np.concatenate(first))
    second = np.sort(np.concatenate(second))
    return ds.subset(first), ds.subset(second)


# ----------------------------------------------------------------------------
# normalization
# ----------------------------------------------------------------------------


def compute_stats(X) -> NormStats:
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise InvalidInputError("cannot compute statistics of an empty dataset")
    mean = X.mean(axis=(0, 2))
    std = X.std(axis=(0, 2))
    degenerate = tuple(int(c) for c in np.flatnonzero(std == 0))
    if degenerate:
        warnings.warn(f"channels {list(degenerate)} have zero variance; using std = 1", stacklevel=2)
        std = np.where(std == 0, 1.0, std)
    return NormStats(mean, std, degenerate)


def apply_stats(X, stats: NormStats):
    return (np.asarray(X, dtype=np.float64) - stats.mean[:, None]) / stats.std[:, None]


def normalize(ds: HarDataset, stats: NormStats | None = None) -> HarDataset:
    """Z-score each channel with ``stats`` (computed from ``ds`` when omitted)."""
    if ds.stats is not None:
        raise InvalidInputError("dataset is already normalized")
    if stats is None:
        stats = compute_stats(ds.X)
    flags = ("degenerate_channels",) if stats.degenerate else ()
    return HarDataset(apply_stats(ds.X, stats), ds.y, ds.subjects, stats, ds.flags + flags)
