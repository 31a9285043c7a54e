import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedhealth.crypto import (
    EncryptedNumber,
    EncryptedParams,
    FixedPointCodec,
    PooledObfuscator,
    add_ciphertexts,
    add_encrypted,
    decrypt_params,
    decrypt_vector,
    encrypt_params,
    encrypt_vector,
    is_probable_prime,
    keygen,
    sum_encrypted,
)
from fedhealth.crypto.params import HEADER_SIZE
from fedhealth.crypto.selfcheck import run_suite
from fedhealth.exceptions import (
    ConfigurationError,
    EncodingRangeError,
    ProtocolError,
    SummandOverflowError,
)
from fedhealth.nn import init_params, har_architecture

FP = "ab" * 32


def small_model(seed=0):
    specs = har_architecture(n_channels=2, length=30, n_classes=3, conv_channels=(3, 4), kernel_size=3, hidden=(5, 4))
    return init_params(specs, (2, 30), seed=seed)


class TestPrimality:
    @pytest.mark.parametrize("n", [2, 3, 5, 97, 7919, 2**61 - 1, 2**127 - 1])
    def test_primes(self, n):
        assert is_probable_prime(n)

    @pytest.mark.parametrize("n", [0, 1, 4, 561, 1105, 7917, 2**61 + 1, 3215031751])
    def test_composites_including_carmichael(self, n):
        assert not is_probable_prime(n)


class TestKeygen:
    def test_modulus_size(self, keypair):
        assert keypair.bits == 256 and keypair.insecure
        assert keypair.private_key.p * keypair.private_key.q == keypair.public_key.n

    def test_seeded_is_reproducible(self):
        assert keygen(256, seed=3, allow_insecure=True).public_key == keygen(256, seed=3, allow_insecure=True).public_key

    def test_small_keys_need_flag(self):
        with pytest.raises(ConfigurationError):
            keygen(512)

    def test_below_minimum(self):
        with pytest.raises(ConfigurationError):
            keygen(128, allow_insecure=True)

    @pytest.mark.slow
    def test_default_1024_bits(self):
        kp = keygen(1024, seed=1)
        assert kp.bits == 1024 and not kp.insecure
        assert kp.private_key.decrypt(kp.public_key.encrypt(123456789)) == 123456789

    def test_zero_roundtrip(self, keypair):
        assert keypair.private_key.decrypt(keypair.public_key.encrypt(0)) == 0

    def test_random_roundtrip(self, keypair):
        pk, sk = keypair.public_key, keypair.private_key
        r = random.Random(1)
        for _ in range(1000):
            m = r.randrange(pk.n)
            assert sk.decrypt(pk.encrypt(m, r)) == m

    def test_probabilistic(self, keypair):
        pk = keypair.public_key
        assert pk.encrypt(42).ciphertext != pk.encrypt(42).ciphertext

    def test_plaintext_range(self, keypair):
        with pytest.raises(ValueError):
            keypair.public_key.raw_encrypt(keypair.public_key.n)


class TestAddition:
    def test_three_plus_five(self, keypair):
        pk, sk = keypair.public_key, keypair.private_key
        assert sk.decrypt(add_ciphertexts(pk.encrypt(3), pk.encrypt(5), pk)) == 8

    def test_additive_identity(self, keypair):
        pk, sk = keypair.public_key, keypair.private_key
        assert sk.decrypt(add_ciphertexts(pk.encrypt(77), pk.encrypt(0), pk)) == 77

    def test_fold_of_25(self, keypair):
        pk, sk = keypair.public_key, keypair.private_key
        r = random.Random(2)
        values = [r.randrange(10**12) for _ in range(25)]
        total = pk.encrypt(values[0], r)
        for v in values[1:]:
            total = add_ciphertexts(total, pk.encrypt(v, r), pk, max_summands=64)
        assert total.summands == 25
        assert sk.decrypt(total) == sum(values)

    def test_modular_wrap(self, keypair):
        pk, sk = keypair.public_key, keypair.private_key
        assert sk.decrypt(add_ciphertexts(pk.encrypt(pk.n - 1), pk.encrypt(5), pk)) == 4

    def test_key_mismatch(self, keypair, other_keypair):
        pk = keypair.public_key
        foreign = other_keypair.public_key.encrypt(1)
        with pytest.raises(ProtocolError):
            add_ciphertexts(pk.encrypt(1), foreign, pk)
        with pytest.raises(ProtocolError):
            keypair.private_key.decrypt(foreign)

    def test_summand_overflow(self, keypair):
        pk = keypair.public_key
        a = EncryptedNumber(pk.encrypt(1).ciphertext, pk.key_id, summands=3)
        with pytest.raises(SummandOverflowError):
            add_ciphertexts(a, pk.encrypt(1), pk, max_summands=3)

    def test_pooled_obfuscators_decrypt(self, keypair):
        pk, sk = keypair.public_key, keypair.private_key
        pool = PooledObfuscator(pk, pool_size=16, draws=3, rng=random.Random(0))
        cts = [pk.raw_encrypt(9, pool()) for _ in range(20)]
        assert all(sk.raw_decrypt(c) == 9 for c in cts)
        assert len(set(cts)) > 1


class TestCodec:
    def test_scale_2_16_example(self, keypair):
        assert FixedPointCodec(keypair.public_key.n, scale_bits=16).encode(1.5) == 98304

    def test_negative_representation(self, codec):
        n = codec.n
        assert codec.encode(-1.0) == n - codec.scale
        assert (codec.encode(-3.25) + codec.encode(3.25)) % n == 0
        assert codec.decode((codec.encode(-3.25) + codec.encode(3.25)) % n) == 0.0

    def test_range_error(self, codec):
        with pytest.raises(EncodingRangeError):
            codec.encode(128.5)
        with pytest.raises(EncodingRangeError):
            codec.encode_array([0.0, -200.0])
        with pytest.raises(EncodingRangeError):
            codec.encode(float("nan"))

    def test_modulus_too_small(self):
        with pytest.raises(ConfigurationError):
            FixedPointCodec(2**36, scale_bits=24, bound=128, max_summands=64)

    def test_no_wrap_invariant(self, codec):
        largest = round(codec.bound * codec.scale)
        assert largest < codec.n // (2 * codec.max_summands)

    @given(st.floats(-10, 10))
    @settings(max_examples=300, deadline=None)
    def test_roundtrip_within_resolution(self, codec, x):
        assert abs(codec.decode(codec.encode(x)) - x) <= 2**-24

    @given(st.lists(st.floats(-128, 128), min_size=1, max_size=64))
    @settings(max_examples=100, deadline=None)
    def test_max_summands_never_wrap(self, codec, xs):
        total = sum(codec.encode(x) for x in xs) % codec.n
        assert abs(codec.decode(total) - sum(xs)) <= len(xs) * codec.resolution

    def test_array_matches_scalar(self, codec, rng):
        v = rng.uniform(-100, 100, 50)
        assert codec.encode_array(v) == [codec.encode(x) for x in v]
        np.testing.assert_array_equal(codec.decode_array(codec.encode_array(v)), [codec.decode(codec.encode(x)) for x in v])


class TestEncryptedParams:
    def test_model_roundtrip(self, keypair, codec):
        model = small_model()
        ep = encrypt_params(model, keypair.public_key, codec, obfuscation="pooled")
        assert ep.summand_count == 1 and len(ep) == model.size
        back = decrypt_params(ep, keypair.private_key, codec, model)
        assert back.fingerprint == model.fingerprint == ep.fingerprint
        assert np.max(np.abs(back.flatten() - model.flatten())) <= codec.resolution

    def test_zero_model(self, keypair, codec):
        model = small_model()
        zero = model.unflatten(np.zeros(model.size))
        back = decrypt_params(encrypt_params(zero, keypair.public_key, codec), keypair.private_key, codec, model)
        assert not np.any(back.flatten())

    def test_range_error_names_layer(self, keypair, codec):
        model = small_model()
        w, b = model.tensors["fc1"]
        big = model.with_tensors({"fc1": (w, b + 500.0)})
        with pytest.raises(EncodingRangeError, match="fc1"):
            encrypt_params(big, keypair.public_key, codec)

    def test_two_point_average(self, keypair, codec):
        p, q = small_model(1), small_model(2)
        pk, sk = keypair.public_key, keypair.private_key
        total = add_encrypted(encrypt_params(p, pk, codec), encrypt_params(q, pk, codec), pk)
        avg = decrypt_params(total, sk, codec, p, average=True)
        assert np.max(np.abs(avg.flatten() - (p.flatten() + q.flatten()) / 2)) <= 2 * codec.resolution

    def test_identical_models_average(self, keypair, codec):
        p = small_model(3)
        pk, sk = keypair.public_key, keypair.private_key
        total = sum_encrypted([encrypt_params(p, pk, codec, obfuscation="pooled") for _ in range(4)], pk)
        avg = decrypt_params(total, sk, codec, p, average=True)
        assert np.max(np.abs(avg.flatten() - p.flatten())) <= 4 * codec.resolution

    def test_five_model_mean_oracle(self, keypair, codec):
        models = [small_model(s) for s in range(5)]
        pk, sk = keypair.public_key, keypair.private_key
        total = sum_encrypted([encrypt_params(m, pk, codec, obfuscation="pooled") for m in models], pk)
        avg = decrypt_params(total, sk, codec, models[0], average=True)
        oracle = np.mean([m.flatten() for m in models], axis=0)
        assert np.max(np.abs(avg.flatten() - oracle)) <= 5 * codec.resolution

    def test_fingerprint_mismatch(self, keypair, codec):
        ep = encrypt_params(small_model(), keypair.public_key, codec)
        other = init_params(har_architecture(n_channels=2, length=30, n_classes=4, conv_channels=(3, 4), kernel_size=3, hidden=(5, 4)), (2, 30))
        with pytest.raises(ProtocolError):
            decrypt_params(ep, keypair.private_key, codec, other)
        with pytest.raises(ProtocolError):
            add_encrypted(ep, encrypt_params(other, keypair.public_key, codec), keypair.public_key)

    def test_aggregate_summand_limit(self, keypair):
        codec = FixedPointCodec(keypair.public_key.n, max_summands=2)
        eps = [encrypt_vector([1.0], keypair.public_key, codec, FP) for _ in range(3)]
        with pytest.raises(SummandOverflowError):
            sum_encrypted(eps, keypair.public_key)


class TestWireFormat:
    @pytest.fixture
    def message(self, keypair, codec):
        return encrypt_vector([1.0, -2.5, 0.0, 100.0], keypair.public_key, codec, FP, rng=random.Random(0))

    def test_roundtrip(self, message):
        data = message.to_bytes()
        assert EncryptedParams.from_bytes(data) == message
        assert data[:4] == b"FHEP"
        assert len(data) > HEADER_SIZE

    def test_header_fields(self, message, keypair):
        head = message.header_bytes()
        assert len(head) == HEADER_SIZE == 71
        assert head[6:38] == bytes.fromhex(FP)
        assert head[38:46] == keypair.public_key.key_id

    def test_text_dump_is_diffable(self, message):
        text = message.to_text().splitlines()
        assert text[1] == f"fingerprint {FP}"
        assert len(text) == 7 + len(message)

    @pytest.mark.parametrize("pos", range(0, HEADER_SIZE, 5))
    def test_tampered_header_rejected(self, message, pos):
        data = bytearray(message.to_bytes())
        data[pos] ^= 0x80
        with pytest.raises(ProtocolError):
            EncryptedParams.from_bytes(bytes(data))

    def test_truncated_and_trailing(self, message):
        data = message.to_bytes()
        with pytest.raises(ProtocolError):
            EncryptedParams.from_bytes(data[:-1])
        with pytest.raises(ProtocolError):
            EncryptedParams.from_bytes(data + b"\x00")
        with pytest.raises(ProtocolError):
            EncryptedParams.from_bytes(data[:30])


def test_property_suite_passes():
    results = run_suite(bits=256, seed=4, n_pairs=200)
    assert all(r.passed for r in results), [str(r) for r in results]
