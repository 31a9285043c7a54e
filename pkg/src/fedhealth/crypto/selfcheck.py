"""Property suite for the encryption layer, runnable without a test framework."""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from ..exceptions import ProtocolError, SummandOverflowError
from .codec import FixedPointCodec
from .paillier import add_ciphertexts, keygen
from .params import EncryptedParams, decrypt_vector, encrypt_vector, sum_encrypted

FINGERPRINT = "00" * 32


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str = ""

    def __str__(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name:<36} {self.detail}"


def check_homomorphic_pairs(kp, codec, n_pairs=1000, seed=0):
    """decode(decrypt(enc(a) + enc(b))) against a + b for random reals in [-10, 10]."""
    rng = np.random.default_rng(seed)
    pk, sk = kp.public_key, kp.private_key
    a = rng.uniform(-10, 10, n_pairs)
    b = rng.uniform(-10, 10, n_pairs)
    prng = random.Random(seed)
    err = 0.0
    for x, y in zip(a, b):
        c = add_ciphertexts(pk.encrypt(codec.encode(x), prng), pk.encrypt(codec.encode(y), prng), pk)
        err = max(err, abs(codec.decode(sk.decrypt(c)) - (x + y)))
    tol = 2 * codec.resolution
    return SuiteResult("homomorphic addition", err <= tol, f"max error {err:.3g} (tolerance {tol:.3g})")


def check_weighted_aggregation(kp, codec, k=5, size=200, seed=0):
    """Encrypted weighted average of ``k`` vectors against the plaintext weighted mean."""
    rng = np.random.default_rng(seed)
    pk, sk = kp.public_key, kp.private_key
    models = rng.normal(scale=0.5, size=(k, size))
    weights = rng.integers(50, 500, size=k).astype(float)
    weights /= weights.sum()
    prng = random.Random(seed)
    uploads = [encrypt_vector(w * m, pk, codec, FINGERPRINT, "exact", prng) for w, m in zip(weights, models)]
    got = decrypt_vector(sum_encrypted(uploads, pk), sk, codec)
    err = float(np.max(np.abs(got - weights @ models)))
    tol = k * codec.resolution
    return SuiteResult("weighted aggregation", err <= tol, f"max error {err:.3g} (tolerance {tol:.3g})")


def check_roundtrip(kp, codec, seed=0):
    rng = np.random.default_rng(seed)
    v = np.concatenate([rng.uniform(-codec.bound, codec.bound, 50), [0.0, codec.bound, -codec.bound]])
    ep = encrypt_vector(v, kp.public_key, codec, FINGERPRINT, "pooled", random.Random(seed))
    back = EncryptedParams.from_bytes(ep.to_bytes())
    err = float(np.max(np.abs(decrypt_vector(back, kp.private_key, codec) - v)))
    tol = codec.resolution
    return SuiteResult("serialize/decrypt round trip", back == ep and err <= tol, f"max error {err:.3g}")


def check_tamper(kp, codec, seed=0):
    ep = encrypt_vector([1.0, -2.0], kp.public_key, codec, FINGERPRINT, "exact", random.Random(seed))
    data = bytearray(ep.to_bytes())
    rejected = 0
    for pos in (0, 10, 40, 52, 60):
        bad = bytearray(data)
        bad[pos] ^= 0x01
        try:
            EncryptedParams.from_bytes(bytes(bad))
        except ProtocolError:
            rejected += 1
    for cut in (len(data) - 1, 20):
        try:
            EncryptedParams.from_bytes(bytes(data[:cut]))
        except ProtocolError:
            rejected += 1
    return SuiteResult("tampered/truncated messages rejected", rejected == 7, f"{rejected}/7 rejected")


def check_key_mismatch(kp, other, codec, seed=0):
    ep = encrypt_vector([0.5], kp.public_key, codec, FINGERPRINT, "exact", random.Random(seed))
    try:
        decrypt_vector(ep, other.private_key, FixedPointCodec(other.public_key.n, codec.scale_bits, codec.bound, codec.max_summands))
    except ProtocolError:
        return SuiteResult("foreign key rejected", True)
    return SuiteResult("foreign key rejected", False, "decryption under the wrong key succeeded")


def check_summand_limit(kp, seed=0):
    codec = FixedPointCodec(kp.public_key.n, max_summands=2)
    prng = random.Random(seed)
    eps = [encrypt_vector([1.0], kp.public_key, codec, FINGERPRINT, "exact", prng) for _ in range(3)]
    try:
        sum_encrypted(eps, kp.public_key)
    except SummandOverflowError:
        return SuiteResult("summand limit enforced", True)
    return SuiteResult("summand limit enforced", False, "three summands accepted with a limit of two")


def run_suite(bits=256, seed=0, n_pairs=1000):
    """Run every property on a freshly generated (seeded, test-only) key pair."""
    kp = keygen(bits, seed=seed, allow_insecure=True)
    other = keygen(bits, seed=seed + 1, allow_insecure=True)
    codec = FixedPointCodec(kp.public_key.n)
    return [
        check_homomorphic_pairs(kp, codec, n_pairs, seed),
        check_weighted_aggregation(kp, codec, seed=seed),
        check_roundtrip(kp, codec, seed),
        check_tamper(kp, codec, seed),
        check_key_mismatch(kp, other, codec, seed),
        check_summand_limit(kp, seed),
    ]
