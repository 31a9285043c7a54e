"""In-process simulation of the federated protocol.

One server, N clients and a key authority. Parameters cross the
client/server boundary only as serialized :class:`EncryptedParams`. The
server never holds a client object or a client's plaintext parameters: it
sees upload bytes, sums them homomorphically and gets back the decrypted
aggregate only.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from ..crypto import (
    EncryptedParams,
    FixedPointCodec,
    KeyPair,
    decrypt_params,
    encrypt_params,
    keygen,
    sum_encrypted,
)
from ..data.har import HarDataset, NormStats, normalize, train_eval_split
from ..evaluation.knn import DEFAULT_CANDIDATES, knn_baseline
from ..exceptions import FedHealthError, InvalidInputError, ProtocolError
from ..nn.model import ModelParams, init_params, har_architecture, predict_proba
from ..nn.optim import train
from ..transfer.personalize import TransferConfig, personalize
from ..validation import check_labels
from .config import CryptoConfig, FederationConfig, ModelConfig, TrainConfig

logger = logging.getLogger(__name__)

CLASSES = np.arange(1, 7)

# payload kinds allowed in audit records
CIPHERTEXT = "ciphertext"
AGGREGATE = "plaintext_aggregate"
NONE = "none"


class RoundAborted(FedHealthError):
    def __init__(self, round_index, step, cause):
        super().__init__(f"round {round_index} aborted in step '{step}': {cause}")
        self.round_index = round_index
        self.step = step
        self.cause = cause


@contextmanager
def _step(round_index, name):
    try:
        yield
    except RoundAborted:
        raise
    except Exception as exc:
        raise RoundAborted(round_index, name, exc) from exc


# ----------------------------------------------------------------------------
# audit log
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditRecord:
    round: int
    actor: str
    event: str
    fingerprint: str
    bytes: int
    payload: str = NONE

    def to_json(self):
        return json.dumps(self.__dict__, sort_keys=True)


class AuditLog:
    """Append-only record of every parameter exchange. Never stores parameter values."""

    FIELDS = ("round", "actor", "event", "fingerprint", "bytes", "payload")

    def __init__(self):
        self.records = []

    def add(self, round_index, actor, event, fingerprint="", nbytes=0, payload=NONE):
        self.records.append(AuditRecord(int(round_index), actor, event, fingerprint, int(nbytes), payload))

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def to_jsonl(self):
        return "".join(r.to_json() + "\n" for r in self.records)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @staticmethod
    def read(path):
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]


# ----------------------------------------------------------------------------
# key custody
# ----------------------------------------------------------------------------


class KeyAuthority:
    """Holds the secret key; hands out the public key and narrow decryption services.

    Clients may decrypt models addressed to them. The server may decrypt only
    aggregates holding at least ``min_summands`` client contributions.
    Decryptions are cached per message digest, since a broadcast reaches every
    client as the same bytes.
    """

    def __init__(self, keypair: KeyPair, codec: FixedPointCodec):
        self._keypair = keypair
        self.codec = codec
        self._cache = {}

    @classmethod
    def from_config(cls, cfg: CryptoConfig):
        kp = keygen(cfg.key_bits, seed=cfg.key_seed, allow_insecure=cfg.insecure_small_keys)
        if kp.insecure:
            logger.warning("using %d-bit Paillier keys: INSECURE, test mode only", kp.bits)
        return cls(kp, FixedPointCodec(kp.public_key.n, cfg.scale_bits, cfg.bound, cfg.max_summands))

    @property
    def public_key(self):
        return self._keypair.public_key

    def _decrypt(self, data: bytes, template: ModelParams):
        digest = hashlib.sha256(data).digest()
        if digest not in self._cache:
            ep = EncryptedParams.from_bytes(data)
            self._cache = {digest: decrypt_params(ep, self._keypair.private_key, self.codec, template)}
        return self._cache[digest]

    def client_decryptor(self):
        return self._decrypt

    def aggregate_decryptor(self, min_summands):
        def decrypt(ep: EncryptedParams, template: ModelParams):
            if not isinstance(ep, EncryptedParams):
                raise ProtocolError("the aggregate decryptor only accepts EncryptedParams")
            if ep.summand_count < min_summands:
                raise ProtocolError(
                    f"refusing to decrypt an aggregate of {ep.summand_count} < {min_summands} client models"
                )
            return decrypt_params(ep, self._keypair.private_key, self.codec, template)

        return decrypt


# ----------------------------------------------------------------------------
# parties
# ----------------------------------------------------------------------------


def _train_split(model, ds: HarDataset, hp: TrainConfig, seed):
    return train(
        model,
        ds.X,
        check_labels(ds.y, CLASSES),
        epochs=hp.epochs,
        batch_size=hp.batch_size,
        learning_rate=hp.learning_rate,
        seed=seed,
    )


def evaluate(params: ModelParams, ds: HarDataset):
    """Predicted activity labels (1..6) for every window of ``ds``."""
    if len(ds) == 0:
        raise InvalidInputError("nothing to evaluate")
    return CLASSES[predict_proba(params, ds.X).argmax(axis=1)]


class Server:
    """Cloud side: owns the cloud data and model, and only ever sees client ciphertexts."""

    def __init__(self, train_set, eval_set, public_key, codec, audit, model_cfg=ModelConfig(), seed=0):
        self._train = train_set
        self._eval = eval_set
        self.public_key = public_key
        self.codec = codec
        self.audit = audit
        self.model_cfg = model_cfg
        self._init_seed, self._shuffle_seed, self._finetune_seed = np.random.SeedSequence(seed).generate_state(3)
        self.model = None
        self.history = []
        self.cloud_eval_accuracy = None
        # types of everything that arrived from clients, for privacy checks
        self.observed_inputs = []

    @property
    def cloud_train(self) -> HarDataset:
        return self._train

    @property
    def stats(self) -> NormStats:
        return self._train.stats

    def initial_model(self):
        specs = har_architecture(
            n_channels=self._train.X.shape[1],
            length=self._train.X.shape[2],
            n_classes=len(CLASSES),
            conv_channels=tuple(self.model_cfg.conv_channels),
            kernel_size=self.model_cfg.kernel_size,
            pool_size=self.model_cfg.pool_size,
            hidden=tuple(self.model_cfg.hidden),
        )
        return init_params(specs, self._train.X.shape[1:], seed=int(self._init_seed))

    def train_cloud(self, hp: TrainConfig):
        if len(self._train) == 0:
            raise InvalidInputError("cloud dataset is empty")
        result = _train_split(self.initial_model(), self._train, hp, int(self._shuffle_seed))
        self.model = result.params
        self.history = [self.model]
        if len(self._eval):
            self.cloud_eval_accuracy = float(np.mean(evaluate(self.model, self._eval) == self._eval.y))
        self.audit.add(0, "server", "cloud_trained", self.model.fingerprint)
        return self.model

    def broadcast(self, round_index, obfuscation="pooled"):
        if self.model is None:
            raise ProtocolError("no cloud model to distribute")
        data = encrypt_params(self.model, self.public_key, self.codec, obfuscation=obfuscation).to_bytes()
        self.audit.add(round_index, "server", "broadcast", self.model.fingerprint, len(data), CIPHERTEXT)
        return data

    def aggregate(self, round_index, uploads, decryptor):
        """Sum encrypted uploads, have the authority decrypt the sum, adopt it as the new model."""
        received = []
        for data in uploads:
            self.observed_inputs.append(type(data).__name__)
            if not isinstance(data, (bytes, bytearray)):
                raise ProtocolError("the server only accepts serialized ciphertext uploads")
            ep = EncryptedParams.from_bytes(bytes(data))
            if ep.fingerprint != self.model.fingerprint:
                raise ProtocolError("upload architecture fingerprint does not match the cloud model")
            self.audit.add(round_index, "server", "receive_upload", ep.fingerprint, len(data), CIPHERTEXT)
            received.append(ep)
        total = sum_encrypted(received, self.public_key)
        self.audit.add(round_index, "server", "homomorphic_sum", total.fingerprint, len(total.to_bytes()), CIPHERTEXT)
        new_model = decryptor(total, self.model)
        self.audit.add(round_index, "server", "aggregate_decrypted", new_model.fingerprint, 0, AGGREGATE)
        self.model = new_model
        self.history.append(new_model)
        return new_model

    def finetune(self, round_index, epochs, hp: TrainConfig):
        if epochs == 0:
            return self.model
        hp = TrainConfig(epochs, hp.batch_size, hp.learning_rate)
        self.model = _train_split(self.model, self._train, hp, int(self._finetune_seed) + round_index).params
        self.history[-1] = self.model
        self.audit.add(round_index, "server", "server_finetuned", self.model.fingerprint)
        return self.model


class Client:
    """One isolated user. Its data never leaves this object."""

    def __init__(self, client_id, train_set, eval_set, public_key, codec, decryptor, audit, seed=0):
        self.client_id = client_id
        self._train = train_set
        self._eval = eval_set
        self.public_key = public_key
        self.codec = codec
        self._decrypt = decryptor
        self.audit = audit
        self._train_seed, self._transfer_seed = np.random.SeedSequence(seed).generate_state(2)
        self.received = None
        self.local_model = None
        self.personalized = None

    @property
    def actor(self):
        return f"client:{self.client_id}"

    @property
    def n_train(self):
        return len(self._train)

    def receive(self, round_index, data, template, event="receive"):
        model = self._decrypt(data, template)
        self.audit.add(round_index, self.actor, event, model.fingerprint, len(data), CIPHERTEXT)
        self.received = model
        return model

    def train_local(self, round_index, start, hp: TrainConfig):
        if self.n_train == 0:
            raise InvalidInputError(f"client {self.client_id} has no training data")
        self.local_model = _train_split(start, self._train, hp, int(self._train_seed) + round_index).params
        self.audit.add(round_index, self.actor, "local_trained", self.local_model.fingerprint)
        return self.local_model

    def upload(self, round_index, weight, obfuscation="pooled"):
        ep = encrypt_params(self.local_model, self.public_key, self.codec, weight=weight, obfuscation=obfuscation)
        data = ep.to_bytes()
        self.audit.add(round_index, self.actor, "upload", ep.fingerprint, len(data), CIPHERTEXT)
        return data

    def personalize(self, round_index, server_model, config: TransferConfig):
        self.personalized, _ = personalize(
            self._train.X,
            check_labels(self._train.y, CLASSES),
            server_model,
            config,
            seed=int(self._transfer_seed) + round_index,
        )
        self.audit.add(round_index, self.actor, "personalized", self.personalized.fingerprint)
        return self.personalized

    def knn(self, reference=None, k=None, candidates=DEFAULT_CANDIDATES, cv=5, seed=0):
        """KNN baseline on this client's evaluation split.

        Fits on ``reference`` if given (e.g. cloud training windows), otherwise on
        the client's own training split. Returns ``(predictions, truths, k)``.
        """
        preds, k = knn_baseline(self._train if reference is None else reference, self._eval, k, candidates, cv, seed)
        return preds, self._eval.y, k

    def evaluate(self, params):
        """``(predictions, truths)`` on this client's evaluation split."""
        return evaluate(params, self._eval), self._eval.y


# ----------------------------------------------------------------------------
# protocol
# ----------------------------------------------------------------------------


@dataclass
class ProtocolResult:
    cloud_model: ModelParams
    history: list
    received: dict = field(default_factory=dict)
    local_models: dict = field(default_factory=dict)
    personalized: dict = field(default_factory=dict)
    audit: AuditLog | None = None

    def digest_trace(self):
        """Content digests of every server model, then each client's local and personalized model."""
        trace = [m.digest() for m in self.history]
        for cid in sorted(self.personalized):
            trace += [self.local_models[cid].digest(), self.personalized[cid].digest()]
        return trace


def train_cloud(server: Server, hp: TrainConfig = TrainConfig()):
    return server.train_cloud(hp)


def distribute(server: Server, clients, round_index=1, obfuscation="pooled", event="receive"):
    """Encrypt the current cloud model once and let every client decrypt it."""
    data = server.broadcast(round_index, obfuscation)
    return [c.receive(round_index, data, server.model, event=event) for c in clients]


def client_train(client: Client, start: ModelParams, hp: TrainConfig = TrainConfig(), round_index=1):
    return client.train_local(round_index, start, hp)


def aggregate(server: Server, uploads, decryptor, round_index=1):
    """Weighted average of client models. Clients pre-scale by their weight before encrypting."""
    return server.aggregate(round_index, uploads, decryptor)


def _map(fn, items, n_jobs):
    if n_jobs == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def run_protocol(
    server: Server,
    clients,
    authority: KeyAuthority,
    cloud_hp=TrainConfig(),
    client_hp=TrainConfig(),
    transfer=TransferConfig(),
    federation=FederationConfig(),
    obfuscation="pooled",
):
    """Cloud training, then ``federation.rounds`` rounds of distribute, local
    training, encrypted aggregation and personalization."""
    audit = server.audit
    with _step(0, "train_cloud"):
        cloud = train_cloud(server, cloud_hp)
    result = ProtocolResult(cloud, server.history, audit=audit)
    if federation.rounds == 0:
        return result
    weights = federation.weights([c.n_train for c in clients])
    decrypt_aggregate = authority.aggregate_decryptor(min_summands=len(clients))
    for r in range(1, federation.rounds + 1):
        with _step(r, "distribute"):
            starts = distribute(server, clients, r, obfuscation)
        with _step(r, "client_train"):
            _map(lambda cs: client_train(cs[0], cs[1], client_hp, r), list(zip(clients, starts)), federation.n_jobs)
        with _step(r, "upload"):
            uploads = [c.upload(r, w, obfuscation) for c, w in zip(clients, weights)]
        with _step(r, "aggregate"):
            aggregate(server, uploads, decrypt_aggregate, r)
            server.finetune(r, federation.server_finetune_epochs, cloud_hp)
        with _step(r, "personalize"):
            received = distribute(server, clients, r, obfuscation, event="receive_aggregate")
            _map(lambda cm: cm[0].personalize(r, cm[1], transfer), list(zip(clients, received)), federation.n_jobs)
    for c in clients:
        result.received[c.client_id] = c.received
        result.local_models[c.client_id] = c.local_model
        result.personalized[c.client_id] = c.personalized
    return result


def build_parties(cloud: HarDataset, clients_data, crypto=CryptoConfig(), model_cfg=ModelConfig(), ratio=0.7, seed=0):
    """Wire up authority, server and clients from raw (unnormalized) datasets.

    ``clients_data`` maps client id to that subject's raw windows. Normalization
    statistics come from the cloud training split and are reused by clients.
    Returns ``(authority, server, clients)``.
    """
    ss = np.random.SeedSequence(seed)
    server_ss, split_ss, *client_ss = ss.spawn(2 + len(clients_data))
    authority = KeyAuthority.from_config(crypto)
    audit = AuditLog()
    cloud_train, cloud_eval = train_eval_split(cloud, ratio, seed=int(split_ss.generate_state(1)[0]))
    cloud_train = normalize(cloud_train)
    stats = cloud_train.stats
    cloud_eval = normalize(cloud_eval, stats)
    server = Server(
        cloud_train,
        cloud_eval,
        authority.public_key,
        authority.codec,
        audit,
        model_cfg,
        seed=int(server_ss.generate_state(1)[0]),
    )
    clients = []
    for (cid, ds), css in zip(sorted(clients_data.items()), client_ss):
        split_seed, client_seed = css.generate_state(2)
        tr, ev = train_eval_split(ds, ratio, seed=int(split_seed))
        clients.append(
            Client(
                cid,
                normalize(tr, stats),
                normalize(ev, stats),
                authority.public_key,
                authority.codec,
                authority.client_decryptor(),
                audit,
                seed=int(client_seed),
            )
        )
    return authority, server, clients
