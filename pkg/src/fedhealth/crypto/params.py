"""Encrypted model parameter vectors and their wire format.

Byte layout of a serialized :class:`EncryptedParams` (all integers big-endian)::

    offset  size  field
    0       4     magic b"FHEP"
    4       2     format version (1)
    6       32    architecture fingerprint (raw SHA-256)
    38      8     key id (first 8 bytes of SHA-256 of the modulus)
    46      1     codec scale bits
    47      4     codec max_summands
    51      4     summand count
    55      8     number of ciphertexts
    63      8     header checksum: first 8 bytes of SHA-256 over bytes 0..62
    71      ...   per ciphertext: u32 byte length, then the ciphertext bytes

:func:`to_text` renders the same content one field or ciphertext per line so
two dumps can be compared with ``diff``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import gmpy2
import numpy as np

from ..exceptions import EncodingRangeError, ProtocolError, SummandOverflowError
from .codec import FixedPointCodec
from .paillier import PooledObfuscator, PrivateKey, PublicKey

MAGIC = b"FHEP"
VERSION = 1
_HEADER = struct.Struct(">4sH32s8sBIIQ")
_CHECKSUM_LEN = 8
HEADER_SIZE = _HEADER.size + _CHECKSUM_LEN


@dataclass(frozen=True)
class EncryptedParams:
    ciphertexts: tuple
    fingerprint: str
    key_id: bytes
    scale_bits: int
    max_summands: int
    summand_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ciphertexts", tuple(self.ciphertexts))
        if not 1 <= self.summand_count <= self.max_summands:
            raise SummandOverflowError(f"summand count {self.summand_count} outside [1, {self.max_summands}]")

    def __len__(self):
        return len(self.ciphertexts)

    def header_bytes(self):
        head = _HEADER.pack(
            MAGIC,
            VERSION,
            bytes.fromhex(self.fingerprint),
            self.key_id,
            self.scale_bits,
            self.max_summands,
            self.summand_count,
            len(self.ciphertexts),
        )
        return head + hashlib.sha256(head).digest()[:_CHECKSUM_LEN]

    def to_bytes(self):
        parts = [self.header_bytes()]
        pack = struct.Struct(">I").pack
        for c in self.ciphertexts:
            raw = c.to_bytes((c.bit_length() + 7) // 8 or 1, "big")
            parts.append(pack(len(raw)))
            parts.append(raw)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data):
        if len(data) < HEADER_SIZE:
            raise ProtocolError("message shorter than the header")
        head, checksum = data[:_HEADER.size], data[_HEADER.size:HEADER_SIZE]
        if hashlib.sha256(head).digest()[:_CHECKSUM_LEN] != checksum:
            raise ProtocolError("header checksum mismatch (tampered or corrupt message)")
        magic, version, fp, key_id, scale_bits, max_summands, count, n = _HEADER.unpack(head)
        if magic != MAGIC or version != VERSION:
            raise ProtocolError(f"unsupported message format {magic!r} v{version}")
        cts, pos, view = [], HEADER_SIZE, memoryview(data)
        for _ in range(n):
            if pos + 4 > len(data):
                raise ProtocolError("truncated ciphertext stream")
            (length,) = struct.unpack_from(">I", data, pos)
            pos += 4
            if pos + length > len(data):
                raise ProtocolError("truncated ciphertext stream")
            cts.append(int.from_bytes(view[pos:pos + length], "big"))
            pos += length
        if pos != len(data):
            raise ProtocolError("trailing bytes after the last ciphertext")
        try:
            return cls(tuple(cts), fp.hex(), key_id, scale_bits, max_summands, count)
        except SummandOverflowError as exc:
            raise ProtocolError(str(exc)) from exc

    def to_text(self):
        lines = [
            f"magic {MAGIC.decode()} version {VERSION}",
            f"fingerprint {self.fingerprint}",
            f"key_id {self.key_id.hex()}",
            f"scale_bits {self.scale_bits}",
            f"max_summands {self.max_summands}",
            f"summand_count {self.summand_count}",
            f"count {len(self.ciphertexts)}",
        ]
        lines += [format(c, "x") for c in self.ciphertexts]
        return "\n".join(lines) + "\n"


def _check_codec(codec: FixedPointCodec, public_key: PublicKey):
    if codec.n != public_key.n:
        raise ProtocolError("codec modulus does not match the public key")


def encrypt_vector(values, public_key, codec, fingerprint, obfuscation="exact", rng=None):
    """Encode and encrypt a flat float vector element by element."""
    _check_codec(codec, public_key)
    encoded = codec.encode_array(values)
    if obfuscation == "pooled":
        obfuscate = PooledObfuscator(public_key, rng=rng)
    elif obfuscation == "exact":
        def obfuscate():
            return public_key.random_obfuscator(rng)
    else:
        raise ValueError(f"unknown obfuscation mode {obfuscation!r}")
    n = gmpy2.mpz(public_key.n)
    n2 = public_key._n2
    cts = tuple(int((1 + m * n) * obfuscate() % n2) for m in encoded)
    return EncryptedParams(cts, fingerprint, public_key.key_id, codec.scale_bits, codec.max_summands, 1)


def encrypt_params(params, public_key: PublicKey, codec: FixedPointCodec, weight=1.0, obfuscation="exact", rng=None):
    """Encrypt ``weight * params`` (flattened). ``weight`` pre-scales for weighted averaging."""
    for name, (w, b) in params.tensors.items():
        peak = weight * max(np.max(np.abs(w), initial=0.0), np.max(np.abs(b), initial=0.0))
        if not peak <= codec.bound:
            raise EncodingRangeError(f"layer {name}: max |value| {peak:.4g} exceeds codec bound {codec.bound}")
    return encrypt_vector(weight * params.flatten(), public_key, codec, params.fingerprint, obfuscation, rng)


def add_encrypted(a: EncryptedParams, b: EncryptedParams, public_key: PublicKey) -> EncryptedParams:
    """Elementwise homomorphic sum of two encrypted vectors."""
    if a.key_id != public_key.key_id or b.key_id != public_key.key_id:
        raise ProtocolError("encrypted vectors use a different key")
    if a.fingerprint != b.fingerprint:
        raise ProtocolError("architecture fingerprints differ")
    if (a.scale_bits, a.max_summands) != (b.scale_bits, b.max_summands) or len(a) != len(b):
        raise ProtocolError("codec parameters or lengths differ")
    count = a.summand_count + b.summand_count
    if count > a.max_summands:
        raise SummandOverflowError(f"aggregate would hold {count} summands, limit is {a.max_summands}")
    n2 = public_key._n2
    cts = tuple(int(gmpy2.mpz(x) * y % n2) for x, y in zip(a.ciphertexts, b.ciphertexts))
    return EncryptedParams(cts, a.fingerprint, a.key_id, a.scale_bits, a.max_summands, count)


def sum_encrypted(items, public_key):
    items = list(items)
    if not items:
        raise ProtocolError("nothing to aggregate")
    total = items[0]
    for item in items[1:]:
        total = add_encrypted(total, item, public_key)
    return total


def decrypt_vector(ep: EncryptedParams, private_key: PrivateKey, codec: FixedPointCodec, average=False):
    if ep.key_id != private_key.public_key.key_id:
        raise ProtocolError("encrypted vector was produced under a different key")
    if (ep.scale_bits, ep.max_summands) != (codec.scale_bits, codec.max_summands):
        raise ProtocolError("codec parameters do not match the message header")
    plain = [private_key.raw_decrypt(c) for c in ep.ciphertexts]
    return codec.decode_array(plain, divisor=ep.summand_count if average else 1)


def decrypt_params(ep: EncryptedParams, private_key: PrivateKey, codec: FixedPointCodec, template, average=False):
    """Decrypt into a copy of ``template``'s architecture.

    With ``average=True`` the decoded sum is divided by the summand count
    (in plaintext, after decryption).
    """
    if ep.fingerprint != template.fingerprint:
        raise ProtocolError("architecture fingerprint does not match the expected model")
    if len(ep) != template.size:
        raise ProtocolError(f"{len(ep)} ciphertexts for a model with {template.size} parameters")
    return template.unflatten(decrypt_vector(ep, private_key, codec, average))
