"""Encrypted squared-distance search for real-valued descriptors.

The owner outsources, per vector component x(k), the pair
E(x(k)^2) and E(-r(k)*x(k)) under his Paillier key, where r is a secret
blinding vector.  A querier who holds the search keys sends, per component
y(k), the blinded residue c1 = r(k)^-1 * y(k) mod n and E(y(k)^2).  The
cloud then evaluates, without interaction or decryption,

    E(-r(k)x(k))^(2*c1) * E(x(k)^2) * E(y(k)^2) = E((x(k)-y(k))^2)

and multiplies across components to get the encrypted squared distance.
All components are fixed-point integers, so the decrypted distances equal
the plaintext fixed-point distances exactly.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpz

from . import paillier
from .descriptor import Descriptor, ratio_match_distances, REAL
from .errors import DimMismatch, ProtocolViolation, VariantMismatch
from .fixedpoint import FixedPointParams, SignedResidue, assert_capacity, encode_fixed, from_residue, to_residue
from .paillier import Ciphertext, PaillierPublicKey, PaillierSecretKey

_sysrand = random.SystemRandom()


@dataclass(frozen=True)
class SearchKeysReal:
    """Owner search-key material; distributed to authorized queriers."""

    public_key: PaillierPublicKey
    secret_key: PaillierSecretKey
    blind: tuple[int, ...]           # r, one invertible residue per dimension
    params: FixedPointParams

    @property
    def dim(self) -> int:
        return len(self.blind)


@dataclass(frozen=True)
class SearchBagReal:
    """Per vector, per dimension: ciphertext values of x(k)^2 and -r(k)x(k)."""

    dim: int
    sq: tuple[tuple[int, ...], ...]
    rx: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.sq)


@dataclass(frozen=True)
class QueryEncodingReal:
    """Per vector, per dimension: blinded residue c1 and ciphertext c2."""

    dim: int
    c1: tuple[tuple[int, ...], ...]
    c2: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.c1)


@dataclass(frozen=True)
class EncryptedDistanceMatrix:
    """|X| x |Y| encrypted squared distances for one stored image."""

    image_index: int
    rows: tuple[tuple[int, ...], ...]


def gen_search_keys(dim: int,
                    prime_bits: int = paillier.DEFAULT_PRIME_BITS,
                    params: FixedPointParams | None = None,
                    rng: random.Random | None = None) -> SearchKeysReal:
    """Fresh Paillier pair plus a uniformly random invertible blinding vector."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = rng or _sysrand
    params = params or FixedPointParams()
    pk, sk = paillier.keygen(prime_bits, rng)
    assert_capacity(params, dim, pk.n)
    blind = []
    while len(blind) < dim:
        r = rng.randrange(1, pk.n)
        if gmpy2.gcd(mpz(r), pk.n) == 1:
            blind.append(r)
    return SearchKeysReal(pk, sk, tuple(blind), params)


def _encode_vector(values, params: FixedPointParams) -> list[int]:
    return [encode_fixed(v, params) for v in values]


def owner_encrypt_descriptor(X: Descriptor, keys: SearchKeysReal,
                             rng: random.Random | None = None) -> SearchBagReal:
    """Build the outsourced search bag for one image descriptor."""
    if X.variant != REAL:
        raise VariantMismatch("real-variant bag needs a real descriptor")
    if X.dim != keys.dim:
        raise DimMismatch(f"descriptor dim {X.dim} vs key dim {keys.dim}")
    pk, n = keys.public_key, keys.public_key.n
    sq_rows, rx_rows = [], []
    for vec in X.vectors:
        t = _encode_vector(vec.values, keys.params)
        sq_rows.append(tuple(
            paillier.encrypt(pk, (tk * tk) % n, rng=rng).value for tk in t
        ))
        rx_rows.append(tuple(
            paillier.encrypt(pk, (-keys.blind[k] * t[k]) % n, rng=rng).value
            for k in range(keys.dim)
        ))
    return SearchBagReal(keys.dim, tuple(sq_rows), tuple(rx_rows))


def querier_encode(Y: Descriptor, keys: SearchKeysReal,
                   rng: random.Random | None = None) -> QueryEncodingReal:
    """Encode a query descriptor: c1 unblinds only jointly with r; c2 is a
    fresh encryption of the squared component."""
    if Y.variant != REAL:
        raise VariantMismatch("real-variant query needs a real descriptor")
    if Y.dim != keys.dim:
        raise DimMismatch(f"descriptor dim {Y.dim} vs key dim {keys.dim}")
    pk, n = keys.public_key, keys.public_key.n
    r_inv = [gmpy2.invert(mpz(r), pk.n) for r in keys.blind]
    c1_rows, c2_rows = [], []
    for vec in Y.vectors:
        t = _encode_vector(vec.values, keys.params)
        c1_rows.append(tuple(
            int(r_inv[k] * to_residue(t[k], n).value % n) for k in range(keys.dim)
        ))
        c2_rows.append(tuple(
            paillier.encrypt(pk, (tk * tk) % n, rng=rng).value for tk in t
        ))
    return QueryEncodingReal(keys.dim, tuple(c1_rows), tuple(c2_rows))


def cloud_distance(bag_vector: tuple[tuple[int, ...], tuple[int, ...]],
                   query_vector: tuple[tuple[int, ...], tuple[int, ...]],
                   pk: PaillierPublicKey) -> Ciphertext:
    """Homomorphically fold one (stored vector, query vector) pair into the
    encrypted squared distance.  Consumes only public material."""
    sq_row, rx_row = bag_vector
    c1_row, c2_row = query_vector
    if not len(sq_row) == len(rx_row) == len(c1_row) == len(c2_row):
        raise DimMismatch("bag and query dimensions differ")
    n, n2 = pk.n, pk.n_squared
    acc = mpz(1)
    for k in range(len(sq_row)):
        cross = gmpy2.powmod(mpz(rx_row[k]), 2 * mpz(c1_row[k]) % n, n2)
        acc = acc * sq_row[k] % n2 * cross % n2 * c2_row[k] % n2
    return Ciphertext(value=acc, public_key=pk)


def cloud_distance_matrix(bag: SearchBagReal, query: QueryEncodingReal,
                          pk: PaillierPublicKey,
                          image_index: int = 0) -> EncryptedDistanceMatrix:
    """All pairwise encrypted distances between one stored descriptor and
    the query (rows: stored vectors, columns: query vectors)."""
    if bag.dim != query.dim:
        raise DimMismatch(f"bag dim {bag.dim} vs query dim {query.dim}")
    rows = []
    for i in range(len(bag)):
        bag_vec = (bag.sq[i], bag.rx[i])
        rows.append(tuple(
            int(cloud_distance(bag_vec, (query.c1[j], query.c2[j]), pk).value)
            for j in range(len(query))
        ))
    return EncryptedDistanceMatrix(image_index, tuple(rows))


def decrypt_distance(sk: PaillierSecretKey, value: int,
                     pk: PaillierPublicKey) -> int:
    """Decrypt one matrix entry to the nonnegative fixed-point distance."""
    m = paillier.decrypt(sk, Ciphertext(value=value, public_key=pk))
    d = from_residue(SignedResidue(m, int(sk.n)))
    if d < 0:
        raise ProtocolViolation(f"squared distance decrypted to {d} < 0")
    return d


def querier_finalize(matrix: EncryptedDistanceMatrix, keys: SearchKeysReal,
                     alpha: float = 0.5) -> int:
    """Decrypt a distance matrix and score it: one point per stored vector
    whose nearest/second-nearest ratio against the query passes."""
    score = 0
    for row in matrix.rows:
        d2 = [decrypt_distance(keys.secret_key, v, keys.public_key) for v in row]
        if ratio_match_distances(d2, alpha)[0]:
            score += 1
    return score


def score_images(matrices, keys: SearchKeysReal, alpha: float = 0.5) -> list[tuple[int, int]]:
    """(image_index, score) for every returned matrix."""
    return [(m.image_index, querier_finalize(m, keys, alpha)) for m in matrices]


# ---- binary (file/wire) serialization ----

_BAG_MAGIC = b"R1"
_QRY_MAGIC = b"Q1"


def search_bag_to_bytes(bag: SearchBagReal, pk: PaillierPublicKey) -> bytes:
    clen = paillier.ciphertext_byte_length(pk)
    out = [_BAG_MAGIC, struct.pack(">HIH", bag.dim, len(bag), clen)]
    for i in range(len(bag)):
        for v in bag.sq[i]:
            out.append(int(v).to_bytes(clen, "big"))
        for v in bag.rx[i]:
            out.append(int(v).to_bytes(clen, "big"))
    return b"".join(out)


def search_bag_from_bytes(raw: bytes) -> SearchBagReal:
    if raw[:2] != _BAG_MAGIC:
        raise ValueError("not a real-variant search bag")
    dim, nvec, clen = struct.unpack(">HIH", raw[2:10])
    pos = 10
    sq_rows, rx_rows = [], []
    for _ in range(nvec):
        sq, rx = [], []
        for _ in range(dim):
            sq.append(int.from_bytes(raw[pos:pos + clen], "big"))
            pos += clen
        for _ in range(dim):
            rx.append(int.from_bytes(raw[pos:pos + clen], "big"))
            pos += clen
        sq_rows.append(tuple(sq))
        rx_rows.append(tuple(rx))
    return SearchBagReal(dim, tuple(sq_rows), tuple(rx_rows))


def query_to_bytes(query: QueryEncodingReal, pk: PaillierPublicKey) -> bytes:
    clen = paillier.ciphertext_byte_length(pk)
    rlen = (int(pk.n).bit_length() + 7) // 8
    out = [_QRY_MAGIC, struct.pack(">HIHH", query.dim, len(query), rlen, clen)]
    for j in range(len(query)):
        for v in query.c1[j]:
            out.append(int(v).to_bytes(rlen, "big"))
        for v in query.c2[j]:
            out.append(int(v).to_bytes(clen, "big"))
    return b"".join(out)


def query_from_bytes(raw: bytes) -> QueryEncodingReal:
    if raw[:2] != _QRY_MAGIC:
        raise ValueError("not a real-variant query encoding")
    dim, nvec, rlen, clen = struct.unpack(">HIHH", raw[2:12])
    pos = 12
    c1_rows, c2_rows = [], []
    for _ in range(nvec):
        c1, c2 = [], []
        for _ in range(dim):
            c1.append(int.from_bytes(raw[pos:pos + rlen], "big"))
            pos += rlen
        for _ in range(dim):
            c2.append(int.from_bytes(raw[pos:pos + clen], "big"))
            pos += clen
        c1_rows.append(tuple(c1))
        c2_rows.append(tuple(c2))
    return QueryEncodingReal(dim, tuple(c1_rows), tuple(c2_rows))


def matrix_to_bytes(matrix: EncryptedDistanceMatrix, pk: PaillierPublicKey) -> bytes:
    clen = paillier.ciphertext_byte_length(pk)
    nrows = len(matrix.rows)
    ncols = len(matrix.rows[0]) if nrows else 0
    out = [struct.pack(">HHH", nrows, ncols, clen)]
    for row in matrix.rows:
        for v in row:
            out.append(int(v).to_bytes(clen, "big"))
    return b"".join(out)


def matrix_from_bytes(raw: bytes, image_index: int) -> EncryptedDistanceMatrix:
    nrows, ncols, clen = struct.unpack(">HHH", raw[:6])
    pos = 6
    rows = []
    for _ in range(nrows):
        row = []
        for _ in range(ncols):
            row.append(int.from_bytes(raw[pos:pos + clen], "big"))
            pos += clen
        rows.append(tuple(row))
    return EncryptedDistanceMatrix(image_index, tuple(rows))
