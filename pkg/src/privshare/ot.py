"""k-of-n oblivious retrieval with padded selection.

The receiver wants the items at indices sigma but reveals only a padded
superset sigma_prime.  Per chosen index he commits B = g^r * h_i where h_i
hashes the index into the prime-order subgroup.  The sender, holding
secret y with Y = g^y published, answers every request against every
padded index with the item's payload key wrapped under KDF((B/h_i)^y);
that quantity equals Y^r exactly for the committed index, so the receiver
opens one table entry per request and nothing else.  The sender's
processing never takes sigma as an input, only the uniformly blinded
requests and sigma_prime.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpz, powmod

from . import otgroup
from .errors import IntegrityFailure, InvalidChoice, MalformedRequest
from .symmetric import aead_decrypt, aead_encrypt

_sysrand = random.SystemRandom()

_ELEMENT_LEN = (otgroup.P.bit_length() + 7) // 8


@dataclass(frozen=True)
class OtGroup:
    p: int
    q: int
    g: int


DEFAULT_GROUP = OtGroup(p=otgroup.P, q=otgroup.Q, g=otgroup.G)


@dataclass(frozen=True)
class OtPublicParams:
    group: OtGroup
    big_y: int  # g^y


@dataclass(frozen=True)
class OtSenderState:
    group: OtGroup
    y: int
    big_y: int
    payload_keys: tuple[bytes, ...]
    item_cts: tuple[bytes, ...]


@dataclass(frozen=True)
class OtChoice:
    sigma: frozenset[int]
    sigma_prime: frozenset[int]

    def __post_init__(self):
        if not self.sigma:
            raise InvalidChoice("sigma must be non-empty")
        if not self.sigma <= self.sigma_prime:
            raise InvalidChoice("sigma must be a subset of sigma_prime")


@dataclass(frozen=True)
class OtReceiverSecret:
    index: int
    r: int


@dataclass(frozen=True)
class OtResponse:
    big_y: int
    indices: tuple[int, ...]                  # sorted sigma_prime
    key_tables: tuple[tuple[bytes, ...], ...]  # per request, per index
    items: tuple[bytes, ...]                  # encrypted items, same order


def hash_to_subgroup(index: int, group: OtGroup = DEFAULT_GROUP) -> int:
    """Deterministically map an item index into the order-q subgroup."""
    counter = 0
    while True:
        digest = hashlib.sha256(b"ot-item|%d|%d" % (index, counter)).digest()
        u = int.from_bytes(digest + hashlib.sha256(digest).digest(), "big") % group.p
        h = powmod(mpz(u), (group.p - 1) // group.q, group.p)
        if h != 1:
            return int(h)
        counter += 1


def _kdf(element: int) -> bytes:
    raw = int(element).to_bytes(_ELEMENT_LEN, "big")
    return hashlib.sha256(b"ot-key|" + raw).digest()[:16]


def ot_setup(items: list[bytes], group: OtGroup = DEFAULT_GROUP,
             rng: random.Random | None = None) -> tuple[OtSenderState, OtPublicParams]:
    """Encrypt every item under a fresh payload key and fix the sender secret."""
    if not items:
        raise ValueError("need at least one item")
    rng = rng or _sysrand
    y = rng.randrange(1, group.q)
    big_y = int(powmod(mpz(group.g), y, group.p))
    payload_keys = tuple(rng.getrandbits(128).to_bytes(16, "big") for _ in items)
    item_cts = tuple(aead_encrypt(key, item, rng)
                     for key, item in zip(payload_keys, items))
    state = OtSenderState(group, y, big_y, payload_keys, item_cts)
    return state, OtPublicParams(group, big_y)


def ot_choose(choice: OtChoice, group: OtGroup = DEFAULT_GROUP,
              rng: random.Random | None = None) -> tuple[list[int], list[OtReceiverSecret]]:
    """One blinded commitment per chosen index, in sorted index order."""
    rng = rng or _sysrand
    requests, secrets = [], []
    for index in sorted(choice.sigma):
        r = rng.randrange(1, group.q)
        b = powmod(mpz(group.g), r, group.p) * hash_to_subgroup(index, group) % group.p
        requests.append(int(b))
        secrets.append(OtReceiverSecret(index, r))
    return requests, secrets


def _check_element(value: int, group: OtGroup) -> mpz:
    v = mpz(value)
    if not 1 <= v < group.p or powmod(v, group.q, group.p) != 1:
        raise MalformedRequest("request element outside the subgroup")
    return v


def ot_respond(state: OtSenderState, requests: list[int],
               sigma_prime: list[int] | frozenset[int],
               rng: random.Random | None = None) -> OtResponse:
    """Answer every request against every padded index.

    Takes no chosen-index information: the response is a deterministic
    function of (state, requests, sigma_prime) given the wrap randomness.
    """
    rng = rng or _sysrand
    group = state.group
    indices = tuple(sorted(sigma_prime))
    for i in indices:
        if not 0 <= i < len(state.item_cts):
            raise IndexError(f"index {i} outside the item store")
    tables = []
    for b in requests:
        b = _check_element(b, group)
        row = []
        for i in indices:
            h_inv = gmpy2.invert(mpz(hash_to_subgroup(i, group)), group.p)
            shared = powmod(b * h_inv % group.p, state.y, group.p)
            row.append(aead_encrypt(_kdf(shared), state.payload_keys[i], rng))
        tables.append(tuple(row))
    return OtResponse(
        big_y=state.big_y,
        indices=indices,
        key_tables=tuple(tables),
        items=tuple(state.item_cts[i] for i in indices),
    )


def ot_finalize(secrets: list[OtReceiverSecret], response: OtResponse,
                group: OtGroup = DEFAULT_GROUP) -> dict[int, bytes]:
    """Open exactly the chosen items, byte-exact."""
    position = {idx: pos for pos, idx in enumerate(response.indices)}
    out = {}
    for secret, table in zip(secrets, response.key_tables):
        if secret.index not in position:
            raise InvalidChoice(f"index {secret.index} missing from response")
        pos = position[secret.index]
        shared = powmod(mpz(response.big_y), secret.r, group.p)
        try:
            payload_key = aead_decrypt(_kdf(shared), table[pos])
            out[secret.index] = aead_decrypt(payload_key, response.items[pos])
        except ValueError as exc:
            raise IntegrityFailure("chosen item failed authentication") from exc
    return out


def pad_choice(sigma: set[int], store_size: int, n: int,
               rng: random.Random | None = None) -> OtChoice:
    """Grow sigma with uniformly random unchosen indices until |sigma'| = n."""
    rng = rng or _sysrand
    if n < len(sigma):
        raise InvalidChoice(f"padded size {n} below |sigma| = {len(sigma)}")
    if n > store_size:
        raise InvalidChoice(f"padded size {n} exceeds store of {store_size}")
    padded = set(sigma)
    while len(padded) < n:
        padded.add(rng.randrange(store_size))
    return OtChoice(frozenset(sigma), frozenset(padded))
