"""Simulated server, clients and key authority exchanging encrypted models."""

from .config import CryptoConfig, FederationConfig, KnnConfig, ModelConfig, RunConfig, TrainConfig
from .protocol import (
    AuditLog,
    AuditRecord,
    Client,
    KeyAuthority,
    ProtocolResult,
    RoundAborted,
    Server,
    aggregate,
    build_parties,
    client_train,
    distribute,
    evaluate,
    run_protocol,
    train_cloud,
)

__all__ = [
    "AuditLog",
    "AuditRecord",
    "Client",
    "CryptoConfig",
    "FederationConfig",
    "KeyAuthority",
    "KnnConfig",
    "ModelConfig",
    "ProtocolResult",
    "RoundAborted",
    "RunConfig",
    "Server",
    "TrainConfig",
    "aggregate",
    "build_parties",
    "client_train",
    "distribute",
    "evaluate",
    "run_protocol",
    "train_cloud",
]
