import random

import pytest

from privshare import paillier
from privshare.errors import InvalidRandomizer, KeyMismatch, MalformedCiphertext, OutOfRange
from privshare.paillier import Ciphertext, decrypt, encrypt, hom_add, hom_scale, keygen


def test_keygen_512_primes_give_1024_bit_modulus():
    pk, sk = keygen(512, random.Random(1))
    assert int(pk.n).bit_length() == 1024
    assert decrypt(sk, encrypt(pk, 12345)) == 12345


def test_keygen_rejects_small_primes():
    with pytest.raises(ValueError):
        keygen(128)


def test_round_trip_zero(keypair):
    pk, sk = keypair
    assert decrypt(sk, encrypt(pk, 0)) == 0


def test_round_trip_boundary(keypair):
    pk, sk = keypair
    assert decrypt(sk, encrypt(pk, int(pk.n) - 1)) == int(pk.n) - 1


def test_round_trip_randomized(keypair, rng):
    pk, sk = keypair
    for _ in range(1000):
        m = rng.randrange(int(pk.n))
        assert decrypt(sk, encrypt(pk, m, rng=rng)) == m


def test_encryption_is_randomized(keypair, rng):
    pk, _ = keypair
    a = encrypt(pk, 7, rng=rng)
    b = encrypt(pk, 7, rng=rng)
    assert a.value != b.value


def test_distinct_randomizers_distinct_ciphertexts(keypair):
    pk, _ = keypair
    assert encrypt(pk, 5, randomizer=3).value != encrypt(pk, 5, randomizer=4).value


def test_plaintext_out_of_range(keypair):
    pk, _ = keypair
    with pytest.raises(OutOfRange):
        encrypt(pk, int(pk.n))
    with pytest.raises(OutOfRange):
        encrypt(pk, -1)


def test_invalid_randomizer(keypair):
    pk, _ = keypair
    with pytest.raises(InvalidRandomizer):
        encrypt(pk, 1, randomizer=0)


def test_hom_add_small_values(keypair):
    pk, sk = keypair
    assert decrypt(sk, hom_add(encrypt(pk, 2), encrypt(pk, 3))) == 5


def test_hom_add_inverse_cancels(keypair, rng):
    pk, sk = keypair
    m = rng.randrange(1, int(pk.n))
    assert decrypt(sk, hom_add(encrypt(pk, m), encrypt(pk, int(pk.n) - m))) == 0


def test_hom_add_randomized(keypair, rng):
    pk, sk = keypair
    n = int(pk.n)
    for _ in range(200):
        m1, m2 = rng.randrange(n), rng.randrange(n)
        got = decrypt(sk, hom_add(encrypt(pk, m1, rng=rng), encrypt(pk, m2, rng=rng)))
        assert got == (m1 + m2) % n


def test_hom_scale_edges(keypair):
    pk, sk = keypair
    c = encrypt(pk, 9)
    assert decrypt(sk, hom_scale(c, 0)) == 0
    assert decrypt(sk, hom_scale(c, 1)) == 9
    assert decrypt(sk, hom_scale(encrypt(pk, 7), 6)) == 42


def test_hom_scale_randomized(keypair, rng):
    pk, sk = keypair
    n = int(pk.n)
    for _ in range(200):
        m, k = rng.randrange(n), rng.randrange(n)
        assert decrypt(sk, hom_scale(encrypt(pk, m, rng=rng), k)) == m * k % n


def test_key_mismatch(keypair):
    pk, _ = keypair
    pk2, _ = keygen(256, random.Random(2))
    with pytest.raises(KeyMismatch):
        hom_add(encrypt(pk, 1), encrypt(pk2, 1))


def test_malformed_ciphertext(keypair):
    pk, sk = keypair
    with pytest.raises(MalformedCiphertext):
        decrypt(sk, Ciphertext(value=0, public_key=pk))
    with pytest.raises(MalformedCiphertext):
        decrypt(sk, Ciphertext(value=int(pk.n_squared), public_key=pk))


def test_ciphertext_bit_distribution_smoke(keypair, rng):
    """Monobit sanity check over fresh encryptions of a fixed plaintext."""
    pk, _ = keypair
    bits = int(pk.n_squared).bit_length() - 8
    ones = total = 0
    for _ in range(1000):
        v = int(encrypt(pk, 424242, rng=rng).value)
        ones += bin(v & ((1 << bits) - 1)).count("1")
        total += bits
    assert 0.49 < ones / total < 0.51


def test_ciphertext_serialization(keypair, rng):
    pk, _ = keypair
    c = encrypt(pk, 31337, rng=rng)
    raw = paillier.ciphertext_to_bytes(c)
    assert len(raw) == paillier.ciphertext_byte_length(pk)
    assert paillier.ciphertext_from_bytes(pk, raw) == c
