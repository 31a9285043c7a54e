"""Additively homomorphic (Paillier) encryption of fixed-point parameter vectors."""

from .codec import FixedPointCodec
from .paillier import (
    EncryptedNumber,
    KeyPair,
    PooledObfuscator,
    PrivateKey,
    PublicKey,
    add_ciphertexts,
    is_probable_prime,
    keygen,
)
from .params import (
    EncryptedParams,
    add_encrypted,
    decrypt_params,
    decrypt_vector,
    encrypt_params,
    encrypt_vector,
    sum_encrypted,
)

__all__ = [
    "EncryptedNumber",
    "EncryptedParams",
    "FixedPointCodec",
    "KeyPair",
    "PooledObfuscator",
    "PrivateKey",
    "PublicKey",
    "add_ciphertexts",
    "add_encrypted",
    "decrypt_params",
    "decrypt_vector",
    "encrypt_params",
    "encrypt_vector",
    "is_probable_prime",
    "keygen",
    "sum_encrypted",
]
