"""Run configuration: a JSON document with one section per concern."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..exceptions import ConfigurationError
from ..transfer.personalize import TransferConfig


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 80
    batch_size: int = 64
    learning_rate: float = 0.01

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate < 0:
            raise ConfigurationError(f"invalid training hyperparameters {self}")


@dataclass(frozen=True)
class ModelConfig:
    conv_channels: tuple = (32, 64)
    kernel_size: int = 9
    pool_size: int = 2
    hidden: tuple = (128, 64)


@dataclass(frozen=True)
class CryptoConfig:
    key_bits: int = 1024
    scale_bits: int = 24
    bound: float = 128.0
    max_summands: int = 64
    # "pooled" reuses precomputed r^n values; "exact" draws a fresh r per element
    obfuscation: str = "pooled"
    insecure_small_keys: bool = False
    key_seed: int | None = None

    def __post_init__(self):
        if self.obfuscation not in ("pooled", "exact"):
            raise ConfigurationError(f"unknown obfuscation mode {self.obfuscation!r}")
        if self.key_bits < 1024 and not self.insecure_small_keys:
            raise ConfigurationError(f"{self.key_bits}-bit keys require insecure_small_keys = true")


@dataclass(frozen=True)
class FederationConfig:
    rounds: int = 1
    # "sample_count" (weights proportional to local training windows), "uniform",
    # or an explicit list of per-client weights summing to 1
    aggregation: object = "sample_count"
    server_finetune_epochs: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.rounds < 0 or self.server_finetune_epochs < 0 or self.n_jobs < 1:
            raise ConfigurationError(f"invalid federation settings {self}")
        if isinstance(self.aggregation, str):
            if self.aggregation not in ("sample_count", "uniform"):
                raise ConfigurationError(f"unknown aggregation rule {self.aggregation!r}")
        else:
            object.__setattr__(self, "aggregation", tuple(float(w) for w in self.aggregation))

    def weights(self, sample_counts):
        k = len(sample_counts)
        if k < 1:
            raise ConfigurationError("need at least one client")
        if self.aggregation == "uniform":
            return [1.0 / k] * k
        if self.aggregation == "sample_count":
            total = sum(sample_counts)
            return [c / total for c in sample_counts]
        weights = list(self.aggregation)
        if len(weights) != k or min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-9:
            raise ConfigurationError(f"aggregation weights {weights} must be {k} non-negative values summing to 1")
        return weights


@dataclass(frozen=True)
class KnnConfig:
    candidates: tuple = (1, 3, 5, 7, 9, 11, 15, 21)
    cv: int = 5
    # "client": fit on the client's own training split; "cloud": fit on cloud training data
    train_source: str = "client"


@dataclass(frozen=True)
class RunConfig:
    client_subjects: tuple = (26, 27, 28, 29, 30)
    train_ratio: float = 0.7
    repeats: int = 5
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    cloud: TrainConfig = field(default_factory=TrainConfig)
    client: TrainConfig = field(default_factory=TrainConfig)
    transfer: TransferConfig = field(default_factory=TransferConfig)
    federation: FederationConfig = field(default_factory=FederationConfig)
    crypto: CryptoConfig = field(default_factory=CryptoConfig)
    knn: KnnConfig = field(default_factory=KnnConfig)
    output_dir: str | None = None

    def __post_init__(self):
        if not self.client_subjects:
            raise ConfigurationError("need at least one client subject")
        if not 0 < self.train_ratio < 1:
            raise ConfigurationError("train_ratio must lie in (0, 1)")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        object.__setattr__(self, "client_subjects", tuple(int(s) for s in self.client_subjects))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        sections = {
            "model": ModelConfig,
            "cloud": TrainConfig,
            "client": TrainConfig,
            "transfer": TransferConfig,
            "federation": FederationConfig,
            "crypto": CryptoConfig,
            "knn": KnnConfig,
        }
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        kwargs = {}
        for key, value in d.items():
            if key in sections:
                section = sections[key]
                names = {f.name for f in dataclasses.fields(section)}
                bad = set(value) - names
                if bad:
                    raise ConfigurationError(f"unknown keys in [{key}]: {sorted(bad)}")
                value = section(**{k: tuple(v) if isinstance(v, list) else v for k, v in value.items()})
            kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")
