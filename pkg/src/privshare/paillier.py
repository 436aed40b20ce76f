"""Paillier cryptosystem (fast g = n+1 variant) with the two homomorphic
identities the search protocols rely on: ciphertext multiplication adds
plaintexts, ciphertext exponentiation scales them.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpz, powmod

from .errors import InvalidRandomizer, KeyMismatch, MalformedCiphertext, OutOfRange

DEFAULT_PRIME_BITS = 512

_sysrand = random.SystemRandom()


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int
    g: int
    n_squared: int

    @classmethod
    def from_modulus(cls, n: int) -> "PaillierPublicKey":
        n = mpz(n)
        return cls(n=n, g=n + 1, n_squared=n * n)


@dataclass(frozen=True)
class PaillierSecretKey:
    lam: int     # lcm(p-1, q-1)
    mu: int      # (L(g^lam mod n^2))^-1 mod n
    n: int
    n_squared: int


@dataclass(frozen=True)
class Ciphertext:
    value: int
    public_key: PaillierPublicKey


def _random_prime(bits: int, rng: random.Random) -> mpz:
    # Top two bits forced so p*q always reaches the full 2*bits length.
    while True:
        cand = mpz(rng.getrandbits(bits)) | (mpz(3) << (bits - 2)) | 1
        if gmpy2.is_prime(cand):
            return cand


def keygen(prime_bits: int = DEFAULT_PRIME_BITS,
           rng: random.Random | None = None) -> tuple[PaillierPublicKey, PaillierSecretKey]:
    """Sample two distinct primes of prime_bits each and derive the key pair."""
    if prime_bits < 256:
        raise ValueError("prime_bits must be >= 256")
    rng = rng or _sysrand
    p = _random_prime(prime_bits, rng)
    q = _random_prime(prime_bits, rng)
    while q == p:
        q = _random_prime(prime_bits, rng)
    n = p * q
    pk = PaillierPublicKey.from_modulus(n)
    lam = mpz(math.lcm(int(p - 1), int(q - 1)))
    mu = gmpy2.invert(_big_l(powmod(pk.g, lam, pk.n_squared), n), n)
    sk = PaillierSecretKey(lam=lam, mu=mu, n=n, n_squared=pk.n_squared)
    return pk, sk


def _big_l(x: mpz, n: mpz) -> mpz:
    return (x - 1) // n


def encrypt(pk: PaillierPublicKey, m: int,
            randomizer: int | None = None,
            rng: random.Random | None = None) -> Ciphertext:
    """Encrypt a residue in [0, n).

    With g = n+1 this is a single exponentiation of the randomizer:
    c = (1 + m*n) * r^n mod n^2.
    """
    n, n2 = pk.n, pk.n_squared
    if not 0 <= m < n:
        raise OutOfRange(f"plaintext {m} outside [0, n)")
    if randomizer is None:
        rng = rng or _sysrand
        while True:
            randomizer = rng.randrange(1, n)
            if gmpy2.gcd(mpz(randomizer), n) == 1:
                break
    elif gmpy2.gcd(mpz(randomizer), n) != 1:
        raise InvalidRandomizer("randomizer shares a factor with n")
    value = (1 + mpz(m) * n) % n2 * powmod(mpz(randomizer), n, n2) % n2
    return Ciphertext(value=value, public_key=pk)


def decrypt(sk: PaillierSecretKey, c: Ciphertext) -> int:
    """Recover the plaintext residue in [0, n)."""
    v = mpz(c.value)
    if not 0 <= v < sk.n_squared or gmpy2.gcd(v, sk.n_squared) != 1:
        raise MalformedCiphertext("value outside the ciphertext group")
    return int(_big_l(powmod(v, sk.lam, sk.n_squared), sk.n) * sk.mu % sk.n)


def hom_add(c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Ciphertext of m1 + m2 (mod n)."""
    if c1.public_key.n != c2.public_key.n:
        raise KeyMismatch("ciphertexts under different moduli")
    pk = c1.public_key
    return Ciphertext(value=c1.value * c2.value % pk.n_squared, public_key=pk)


def hom_scale(c: Ciphertext, k: int) -> Ciphertext:
    """Ciphertext of m * k (mod n)."""
    pk = c.public_key
    return Ciphertext(value=powmod(mpz(c.value), mpz(k), pk.n_squared), public_key=pk)


def ciphertext_byte_length(pk: PaillierPublicKey) -> int:
    """Fixed serialized length of one ciphertext under this key."""
    return (int(pk.n_squared).bit_length() + 7) // 8


def ciphertext_to_bytes(c: Ciphertext) -> bytes:
    return int(c.value).to_bytes(ciphertext_byte_length(c.public_key), "big")


def ciphertext_from_bytes(pk: PaillierPublicKey, raw: bytes) -> Ciphertext:
    return Ciphertext(value=mpz(int.from_bytes(raw, "big")), public_key=pk)
