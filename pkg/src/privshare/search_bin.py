"""Encrypted Hamming-distance search for binary descriptors.

For bit vectors the squared Euclidean distance collapses to the XOR
popcount, so each stored bit x(k) becomes a tiny two-row garbled table:
row b holds an authenticated symmetric encryption, under the wire key for
bit value b, of a Paillier ciphertext of x(k) XOR b.  A querier encodes
y(k) as the matching wire key; the cloud opens exactly one row per bit and
multiplies the recovered ciphertexts into E(sum_k x(k) XOR y(k)).

Wire keys are derived per position from a hash chain over the owner's seed
combined with one of two secret labels, so only search-key holders can
form valid inputs.  Rows carry short tags so the evaluator finds its row
without trial decryption.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpz

from . import paillier
from .descriptor import BINARY, Descriptor, FeatureVector
from .errors import AuthFailure, DimMismatch, NoMatchingRow, VariantMismatch
from .paillier import Ciphertext, PaillierPublicKey, PaillierSecretKey
from .symmetric import aead_decrypt, aead_encrypt

_sysrand = random.SystemRandom()

WIRE_KEY_LEN = 16
TAG_LEN = 16
LABEL_LEN = 16
SEED_LEN = 32

_TAG_DOMAIN = b"\x01"


@dataclass(frozen=True)
class SearchKeysBin:
    """Paillier pair plus the two wire labels and the position seed."""

    public_key: PaillierPublicKey
    secret_key: PaillierSecretKey
    label0: bytes
    label1: bytes
    seed: bytes

    def __post_init__(self):
        if self.label0 == self.label1:
            raise ValueError("wire labels must differ")


@dataclass(frozen=True)
class GarbledGate:
    """Two shuffled rows of (tag, sealed Paillier ciphertext)."""

    rows: tuple[tuple[bytes, bytes], tuple[bytes, bytes]]


@dataclass(frozen=True)
class GarbledInput:
    """One wire key per query bit."""

    keys: tuple[bytes, ...]

    def __len__(self) -> int:
        return len(self.keys)


@dataclass(frozen=True)
class SearchBagBin:
    dim: int
    vectors: tuple[tuple[GarbledGate, ...], ...]

    def __len__(self) -> int:
        return len(self.vectors)


def gen_search_keys_bin(prime_bits: int = paillier.DEFAULT_PRIME_BITS,
                        rng: random.Random | None = None) -> SearchKeysBin:
    rng = rng or _sysrand
    pk, sk = paillier.keygen(prime_bits, rng)
    label0 = rng.getrandbits(8 * LABEL_LEN).to_bytes(LABEL_LEN, "big")
    label1 = rng.getrandbits(8 * LABEL_LEN).to_bytes(LABEL_LEN, "big")
    while label1 == label0:
        label1 = rng.getrandbits(8 * LABEL_LEN).to_bytes(LABEL_LEN, "big")
    seed = rng.getrandbits(8 * SEED_LEN).to_bytes(SEED_LEN, "big")
    return SearchKeysBin(pk, sk, label0, label1, seed)


def _hash(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def derive_wire_key(seed: bytes, k: int, label: bytes) -> bytes:
    """Wire key for position k (1-based) and one bit label: hash the
    k-times-iterated seed chain together with the label."""
    if k < 1:
        raise ValueError("bit positions are 1-based")
    link = seed
    for _ in range(k):
        link = _hash(link)
    return _hash(link + label)[:WIRE_KEY_LEN]


def row_tag(wire_key: bytes) -> bytes:
    """Public row identifier; derivable only from the wire key."""
    return _hash(wire_key + _TAG_DOMAIN)[:TAG_LEN]


def _wire_key_pairs(keys: SearchKeysBin, dim: int):
    """Both wire keys for positions 1..dim, walking the chain once."""
    link = keys.seed
    for _ in range(dim):
        link = _hash(link)
        yield (_hash(link + keys.label0)[:WIRE_KEY_LEN],
               _hash(link + keys.label1)[:WIRE_KEY_LEN])


def garble_vector(x: FeatureVector, keys: SearchKeysBin,
                  rng: random.Random | None = None) -> tuple[GarbledGate, ...]:
    """Garble one binary vector into per-bit two-row tables.

    Row for input bit b seals E(x(k) XOR b).  One row is a fresh Paillier
    encryption; the complementary row is folded homomorphically off a
    single fresh E(1) per vector, which halves the owner's exponentiation
    count while keeping the two row ciphertexts distinct.  Rows are
    shuffled by a fair coin.
    """
    rng = rng or _sysrand
    pk = keys.public_key
    n2 = pk.n_squared
    one = paillier.encrypt(pk, 1, rng=rng).value
    gates = []
    for bit, (gamma0, gamma1) in zip(x.values, _wire_key_pairs(keys, x.dim)):
        direct = paillier.encrypt(pk, bit, rng=rng).value        # x XOR 0
        flipped = one * gmpy2.invert(direct, n2) % n2            # x XOR 1
        row0 = (row_tag(gamma0), aead_encrypt(gamma0, _ct_bytes(direct, pk), rng))
        row1 = (row_tag(gamma1), aead_encrypt(gamma1, _ct_bytes(flipped, pk), rng))
        rows = (row0, row1) if rng.getrandbits(1) == 0 else (row1, row0)
        gates.append(GarbledGate(rows))
    return tuple(gates)


def owner_garble_descriptor(X: Descriptor, keys: SearchKeysBin,
                            rng: random.Random | None = None) -> SearchBagBin:
    if X.variant != BINARY:
        raise VariantMismatch("binary bag needs a binary descriptor")
    return SearchBagBin(X.dim, tuple(garble_vector(v, keys, rng) for v in X.vectors))


def encode_query(y: FeatureVector, keys: SearchKeysBin) -> GarbledInput:
    """Wire key per query bit; deterministic given the search keys."""
    out = []
    for bit, (gamma0, gamma1) in zip(y.values, _wire_key_pairs(keys, y.dim)):
        out.append(gamma1 if bit else gamma0)
    return GarbledInput(tuple(out))


def encode_query_descriptor(Y: Descriptor, keys: SearchKeysBin) -> tuple[GarbledInput, ...]:
    if Y.variant != BINARY:
        raise VariantMismatch("binary query needs a binary descriptor")
    return tuple(encode_query(v, keys) for v in Y.vectors)


def cloud_eval(gates: tuple[GarbledGate, ...], query: GarbledInput,
               pk: PaillierPublicKey) -> Ciphertext:
    """Open one row per gate with the presented wire keys and multiply the
    recovered ciphertexts into the encrypted Hamming distance."""
    if len(gates) != len(query):
        raise DimMismatch(f"{len(gates)} gates vs {len(query)} wire keys")
    n2 = pk.n_squared
    acc = mpz(1)
    for gate, wire_key in zip(gates, query.keys):
        tag = row_tag(wire_key)
        for row_t, payload in gate.rows:
            if row_t == tag:
                break
        else:
            raise NoMatchingRow("no gate row tagged for this wire key")
        try:
            raw = aead_decrypt(wire_key, payload)
        except ValueError as exc:
            raise AuthFailure("gate payload failed authentication") from exc
        acc = acc * mpz(int.from_bytes(raw, "big")) % n2
    return Ciphertext(value=acc, public_key=pk)


def _ct_bytes(value, pk: PaillierPublicKey) -> bytes:
    return int(value).to_bytes(paillier.ciphertext_byte_length(pk), "big")


# ---- binary (file/wire) serialization ----

_BAG_MAGIC = b"B1"
_QRY_MAGIC = b"G1"


def search_bag_to_bytes(bag: SearchBagBin) -> bytes:
    out = [_BAG_MAGIC, struct.pack(">HI", bag.dim, len(bag))]
    for gates in bag.vectors:
        body = []
        for gate in gates:
            for tag, payload in gate.rows:
                body.append(tag)
                body.append(struct.pack(">I", len(payload)))
                body.append(payload)
        blob = b"".join(body)
        out.append(struct.pack(">I", len(blob)))
        out.append(blob)
    return b"".join(out)


def search_bag_from_bytes(raw: bytes) -> SearchBagBin:
    if raw[:2] != _BAG_MAGIC:
        raise ValueError("not a binary-variant search bag")
    dim, nvec = struct.unpack(">HI", raw[2:8])
    pos = 8
    vectors = []
    for _ in range(nvec):
        (blob_len,) = struct.unpack(">I", raw[pos:pos + 4])
        pos += 4
        end = pos + blob_len
        gates = []
        while pos < end:
            rows = []
            for _ in range(2):
                tag = raw[pos:pos + TAG_LEN]
                pos += TAG_LEN
                (plen,) = struct.unpack(">I", raw[pos:pos + 4])
                pos += 4
                rows.append((tag, raw[pos:pos + plen]))
                pos += plen
            gates.append(GarbledGate((rows[0], rows[1])))
        if len(gates) != dim:
            raise ValueError("gate count does not match dimension")
        vectors.append(tuple(gates))
    return SearchBagBin(dim, tuple(vectors))


def query_to_bytes(inputs: tuple[GarbledInput, ...]) -> bytes:
    out = [_QRY_MAGIC, struct.pack(">HI", len(inputs[0]), len(inputs))]
    for gi in inputs:
        for key in gi.keys:
            out.append(key)
    return b"".join(out)


def query_from_bytes(raw: bytes) -> tuple[GarbledInput, ...]:
    if raw[:2] != _QRY_MAGIC:
        raise ValueError("not a binary-variant query encoding")
    dim, nvec = struct.unpack(">HI", raw[2:8])
    pos = 8
    inputs = []
    for _ in range(nvec):
        keys = []
        for _ in range(dim):
            keys.append(raw[pos:pos + WIRE_KEY_LEN])
            pos += WIRE_KEY_LEN
        inputs.append(GarbledInput(tuple(keys)))
    return tuple(inputs)
