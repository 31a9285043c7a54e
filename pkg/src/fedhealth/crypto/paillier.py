"""Paillier cryptosystem with the ``g = n + 1`` simplification.

Ciphertexts live in ``Z*_{n^2}``; multiplying two ciphertexts adds their
plaintexts modulo ``n``.
"""

from __future__ import annotations

import hashlib
import random
import secrets
from dataclasses import dataclass
from functools import cached_property

import gmpy2

from ..exceptions import ConfigurationError, ProtocolError, SummandOverflowError

MIN_BITS = 256
SECURE_BITS = 1024
MR_ROUNDS = 40

_SMALL_PRIMES = [p for p in range(3, 2000) if all(p % d for d in range(2, int(p**0.5) + 1))]


def is_probable_prime(n, rounds=MR_ROUNDS, rng=None):
    """Trial division by small primes followed by ``rounds`` Miller-Rabin rounds."""
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    rng = rng or random.SystemRandom()
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    n_mpz = gmpy2.mpz(n)
    for _ in range(rounds):
        x = gmpy2.powmod(rng.randrange(2, n - 1), d, n_mpz)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = gmpy2.powmod(x, 2, n_mpz)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits, rng):
    while True:
        # top two bits set so that p * q has exactly 2 * bits bits
        candidate = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        if is_probable_prime(candidate, rng=rng):
            return candidate


@dataclass(frozen=True)
class PublicKey:
    n: int

    @cached_property
    def nsquare(self):
        return self.n * self.n

    @property
    def g(self):
        return self.n + 1

    @property
    def bits(self):
        return self.n.bit_length()

    @cached_property
    def key_id(self):
        """First 8 bytes of SHA-256 over the big-endian modulus."""
        return hashlib.sha256(self.n.to_bytes((self.bits + 7) // 8, "big")).digest()[:8]

    @cached_property
    def _n2(self):
        return gmpy2.mpz(self.nsquare)

    def random_obfuscator(self, rng=None):
        """``r^n mod n^2`` for a uniformly random unit ``r``."""
        rng = rng or _system_rng
        while True:
            r = rng.randrange(1, self.n)
            if gmpy2.gcd(r, self.n) == 1:
                return gmpy2.powmod(r, self.n, self._n2)

    def raw_encrypt(self, m, obfuscator=None):
        """Encrypt an integer plaintext in ``[0, n)``."""
        if not 0 <= m < self.n:
            raise ValueError("plaintext must lie in [0, n)")
        if obfuscator is None:
            obfuscator = self.random_obfuscator()
        # (n + 1)^m = 1 + m n  (mod n^2)
        return int((1 + m * self.n) * obfuscator % self._n2)

    def encrypt(self, m, rng=None):
        return EncryptedNumber(self.raw_encrypt(m, self.random_obfuscator(rng)), self.key_id)

    def raw_add(self, c1, c2):
        return int(gmpy2.mpz(c1) * c2 % self._n2)


_system_rng = random.SystemRandom()


class PooledObfuscator:
    """Cheap obfuscators: products of ``draws`` entries from a pool of precomputed ``r^n``.

    Each product is still an n-th residue, so decryption is unaffected. The
    randomness comes from ``C(pool_size, draws)`` subsets instead of a fresh
    ``r``, trading some hiding strength for roughly two orders of magnitude in
    speed. Meant for large simulated parameter vectors, not real deployments.
    """

    def __init__(self, public_key: PublicKey, pool_size=256, draws=6, rng=None):
        if draws > pool_size:
            raise ConfigurationError("draws must not exceed pool size")
        self.public_key = public_key
        self.draws = draws
        rng = rng or _system_rng
        self._pool = [public_key.random_obfuscator(rng) for _ in range(pool_size)]
        # subset selection only; the pool itself comes from the secure source
        self._picker = random.Random(rng.getrandbits(128))

    def __call__(self):
        n2 = self.public_key._n2
        out = gmpy2.mpz(1)
        for i in self._picker.sample(range(len(self._pool)), self.draws):
            out = out * self._pool[i] % n2
        return out


@dataclass(frozen=True)
class PrivateKey:
    public_key: PublicKey
    p: int
    q: int

    def __post_init__(self):
        if self.p * self.q != self.public_key.n:
            raise ConfigurationError("p * q does not match the public modulus")

    @cached_property
    def _crt(self):
        p, q = gmpy2.mpz(self.p), gmpy2.mpz(self.q)
        p2, q2 = p * p, q * q
        g = gmpy2.mpz(self.public_key.g)

        def h(x, x2):
            return gmpy2.invert((gmpy2.powmod(g, x - 1, x2) - 1) // x, x)

        return p, q, p2, q2, h(p, p2), h(q, q2), gmpy2.invert(p, q)

    def raw_decrypt(self, c):
        if not 0 < c < self.public_key.nsquare:
            raise ValueError("ciphertext out of range")
        p, q, p2, q2, hp, hq, p_inv = self._crt
        mp = (gmpy2.powmod(c, p - 1, p2) - 1) // p * hp % p
        mq = (gmpy2.powmod(c, q - 1, q2) - 1) // q * hq % q
        return int(mp + (mq - mp) * p_inv % q * p)

    def decrypt(self, number: EncryptedNumber):
        if number.key_id != self.public_key.key_id:
            raise ProtocolError("ciphertext was produced under a different key")
        return self.raw_decrypt(number.ciphertext)


@dataclass(frozen=True)
class KeyPair:
    public_key: PublicKey
    private_key: PrivateKey

    @property
    def bits(self):
        return self.public_key.bits

    @property
    def insecure(self):
        return self.bits < SECURE_BITS


def keygen(bits=SECURE_BITS, seed=None, allow_insecure=False) -> KeyPair:
    """Generate a Paillier key pair with a ``bits``-bit modulus.

    With ``seed`` the keys are reproducible (and therefore only fit for
    simulation). Moduli below 1024 bits need ``allow_insecure=True``.
    """
    if bits < MIN_BITS or bits % 2:
        raise ConfigurationError(f"key size must be an even number of bits >= {MIN_BITS}, got {bits}")
    if bits < SECURE_BITS and not allow_insecure:
        raise ConfigurationError(f"{bits}-bit keys are insecure; pass allow_insecure=True for test mode")
    rng = random.Random(seed) if seed is not None else random.Random(secrets.randbits(256))
    while True:
        p = _random_prime(bits // 2, rng)
        q = _random_prime(bits // 2, rng)
        if p != q and (p * q).bit_length() == bits:
            break
    pk = PublicKey(p * q)
    return KeyPair(pk, PrivateKey(pk, p, q))


@dataclass(frozen=True)
class EncryptedNumber:
    """A single ciphertext tagged with its key and how many plaintexts it sums."""

    ciphertext: int
    key_id: bytes
    summands: int = 1


def add_ciphertexts(c1: EncryptedNumber, c2: EncryptedNumber, public_key: PublicKey, max_summands=None):
    """Homomorphic addition: the result decrypts to ``m1 + m2 mod n``."""
    if not (c1.key_id == c2.key_id == public_key.key_id):
        raise ProtocolError("ciphertexts were produced under different keys")
    summands = c1.summands + c2.summands
    if max_summands is not None and summands > max_summands:
        raise SummandOverflowError(f"sum would contain {summands} plaintexts, limit is {max_summands}")
    return EncryptedNumber(public_key.raw_add(c1.ciphertext, c2.ciphertext), c1.key_id, summands)
