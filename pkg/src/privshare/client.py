"""Client-side flows: owners build bags and publish keys, queriers unwrap
search keys, encode queries, score decrypted distances, and retrieve the
winning images obliviously.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from . import access, search_bin, search_real, wire
from .access import AttributeCredential, KeyEnvelope
from .cloud import split_item
from .descriptor import Descriptor, rank_top_k
from .errors import VariantMismatch
from .fixedpoint import FixedPointParams
from .ot import OtChoice, OtResponse, ot_choose, ot_finalize
from .paillier import PaillierPublicKey, PaillierSecretKey
from .rop import GrayImage, RopRect, SecretPart, secret_part_from_bytes, secret_part_to_bytes, separate_blur, separate_mask
from .search_bin import SearchKeysBin
from .search_real import SearchKeysReal
from .symmetric import random_key
from .wire import b64d, b64e, int_from_b64, int_to_b64

REAL = "real"
BINARY = "binary"


# ---- search-key (de)serialization, the envelope payload ----

def search_keys_to_bytes(keys: SearchKeysReal | SearchKeysBin) -> bytes:
    if isinstance(keys, SearchKeysReal):
        obj = {
            "blind": [int_to_b64(r) for r in keys.blind],
            "lambda": int_to_b64(keys.secret_key.lam),
            "mu": int_to_b64(keys.secret_key.mu),
            "n": int_to_b64(keys.public_key.n),
            "range_bits": keys.params.range_bits,
            "scale_bits": keys.params.scale_bits,
            "variant": REAL,
        }
    else:
        obj = {
            "label0": b64e(keys.label0),
            "label1": b64e(keys.label1),
            "lambda": int_to_b64(keys.secret_key.lam),
            "mu": int_to_b64(keys.secret_key.mu),
            "n": int_to_b64(keys.public_key.n),
            "seed": b64e(keys.seed),
            "variant": BINARY,
        }
    return json.dumps(obj, sort_keys=True).encode()


def search_keys_from_bytes(raw: bytes) -> SearchKeysReal | SearchKeysBin:
    obj = json.loads(raw.decode())
    n = int_from_b64(obj["n"])
    pk = PaillierPublicKey.from_modulus(n)
    sk = PaillierSecretKey(
        lam=int_from_b64(obj["lambda"]), mu=int_from_b64(obj["mu"]),
        n=pk.n, n_squared=pk.n_squared)
    if obj["variant"] == REAL:
        return SearchKeysReal(
            public_key=pk, secret_key=sk,
            blind=tuple(int_from_b64(r) for r in obj["blind"]),
            params=FixedPointParams(obj["scale_bits"], obj["range_bits"]))
    return SearchKeysBin(
        public_key=pk, secret_key=sk,
        label0=b64d(obj["label0"]), label1=b64d(obj["label1"]),
        seed=b64d(obj["seed"]))


# ---- owner flows ----

@dataclass(frozen=True)
class BuiltBags:
    public_bag: bytes
    private_bag: bytes
    search_bag: bytes


def build_image_bags(img: GrayImage, rect: RopRect, method: str,
                     descriptor: Descriptor,
                     keys: SearchKeysReal | SearchKeysBin,
                     policy: access.PolicyNode,
                     authority: access.AuthorityState,
                     kernel: int | None = None,
                     rng: random.Random | None = None) -> BuiltBags:
    """Separate the private region, seal it under a fresh key wrapped by
    the owner's policy, and encrypt the descriptor into the search bag."""
    from .rop import pgm_to_bytes

    if method == "mask":
        public_img, secret = separate_mask(img, rect)
    elif method == "blur":
        public_img, secret = separate_blur(img, rect, kernel)
    else:
        raise ValueError(f"unknown separation method {method!r}")

    k_e = random_key(rng)
    sealed = access.seal_secret_rop(secret_part_to_bytes(secret), k_e, rng)
    k_e_envelope = access.wrap(policy, k_e, authority, rng)
    private_bag = json.dumps({
        "key_envelope": access.envelope_to_json(k_e_envelope),
        "sealed": b64e(sealed),
    }, sort_keys=True).encode()

    if isinstance(keys, SearchKeysReal):
        bag = search_real.owner_encrypt_descriptor(descriptor, keys, rng)
        search_bag = search_real.search_bag_to_bytes(bag, keys.public_key)
    else:
        bag = search_bin.owner_garble_descriptor(descriptor, keys, rng)
        search_bag = search_bin.search_bag_to_bytes(bag)
    return BuiltBags(pgm_to_bytes(public_img), private_bag, search_bag)


def open_private_bag(private_bag: bytes,
                     credentials: list[AttributeCredential]) -> SecretPart:
    obj = json.loads(private_bag.decode())
    envelope = access.envelope_from_json(obj["key_envelope"])
    k_e = access.unwrap(envelope, credentials)
    return secret_part_from_bytes(access.open_secret_rop(b64d(obj["sealed"]), k_e))


# ---- wire client ----

class CloudClient:
    def __init__(self, sharing_host: str, sharing_port: int,
                 search_host: str | None = None, search_port: int | None = None):
        self.sharing = (sharing_host, sharing_port)
        self.search = (search_host or sharing_host, search_port or sharing_port)

    def upload_envelope(self, owner_id: str, envelope: KeyEnvelope,
                        modulus: int, variant: str, force: bool = False) -> None:
        wire.request(*self.sharing, wire.MSG_UPLOAD, {
            "envelope_b64": b64e(access.envelope_to_bytes(envelope)),
            "force": force,
            "kind": "envelope",
            "modulus_b64": int_to_b64(modulus),
            "owner_id": owner_id,
            "variant": variant,
        })

    def upload_image(self, owner_id: str, image_id: str, variant: str,
                     bags: BuiltBags) -> None:
        wire.request(*self.sharing, wire.MSG_UPLOAD, {
            "image_id": image_id,
            "kind": "image",
            "owner_id": owner_id,
            "private_b64": b64e(bags.private_bag),
            "public_b64": b64e(bags.public_bag),
            "search_b64": b64e(bags.search_bag),
            "variant": variant,
        })

    def fetch_envelope(self, owner_id: str) -> tuple[KeyEnvelope, int, str]:
        _, body = wire.request(*self.sharing, wire.MSG_FETCH_ENVELOPE,
                               {"owner_id": owner_id})
        return (access.envelope_from_bytes(b64d(body["envelope_b64"])),
                int_from_b64(body["modulus_b64"]), body["variant"])

    def query(self, owner_id: str, variant: str, query_bytes: bytes,
              session_id: str | None = None) -> tuple[list[tuple[int, bytes]], list[str]]:
        if session_id is None:
            session_id = "%08x" % random.SystemRandom().getrandbits(32)
        _, body = wire.request(*self.search, wire.MSG_QUERY, {
            "owner_id": owner_id,
            "query_b64": b64e(query_bytes),
            "session_id": session_id,
            "variant": variant,
        })
        images = [(entry["index"], b64d(entry["matrix_b64"]))
                  for entry in body["images"]]
        return images, list(body["manifest"])

    def ot_retrieve(self, owner_id: str, choice: OtChoice,
                    rng: random.Random | None = None) -> dict[int, tuple[bytes, bytes]]:
        requests, secrets = ot_choose(choice, rng=rng)
        _, body = wire.request(*self.sharing, wire.MSG_OT_REQUEST, {
            "owner_id": owner_id,
            "requests": [int_to_b64(b) for b in requests],
            "sigma_prime": sorted(choice.sigma_prime),
        })
        response = OtResponse(
            big_y=int_from_b64(body["big_y_b64"]),
            indices=tuple(body["indices"]),
            key_tables=tuple(tuple(b64d(w) for w in row)
                             for row in body["tables_b64"]),
            items=tuple(b64d(c) for c in body["items_b64"]),
        )
        raw_items = ot_finalize(secrets, response)
        return {idx: split_item(raw) for idx, raw in raw_items.items()}


# ---- querier scoring ----

def encode_query_descriptor(Y: Descriptor, keys: SearchKeysReal | SearchKeysBin,
                            rng: random.Random | None = None) -> bytes:
    if isinstance(keys, SearchKeysReal):
        if Y.variant != REAL:
            raise VariantMismatch("keys are real-variant, descriptor is not")
        enc = search_real.querier_encode(Y, keys, rng)
        return search_real.query_to_bytes(enc, keys.public_key)
    if Y.variant != BINARY:
        raise VariantMismatch("keys are binary-variant, descriptor is not")
    inputs = search_bin.encode_query_descriptor(Y, keys)
    return search_bin.query_to_bytes(inputs)


def score_query_results(results: list[tuple[int, bytes]],
                        keys: SearchKeysReal | SearchKeysBin,
                        alpha: float = 0.5) -> list[tuple[int, int]]:
    """Decrypt every returned matrix and score it; (index, score) pairs."""
    out = []
    for index, blob in results:
        matrix = search_real.matrix_from_bytes(blob, index)
        if isinstance(keys, SearchKeysReal):
            score = search_real.querier_finalize(matrix, keys, alpha)
        else:
            score = _finalize_binary(matrix, keys, alpha)
        out.append((index, score))
    return out


def _finalize_binary(matrix: search_real.EncryptedDistanceMatrix,
                     keys: SearchKeysBin, alpha: float) -> int:
    from .descriptor import ratio_match_distances
    from .paillier import Ciphertext, decrypt

    score = 0
    for row in matrix.rows:
        d2 = [decrypt(keys.secret_key,
                      Ciphertext(value=v, public_key=keys.public_key))
              for v in row]
        if ratio_match_distances(d2, alpha)[0]:
            score += 1
    return score


def rank_results(scores: list[tuple[int, int]], manifest: list[str],
                 k: int) -> list[tuple[str, int, int]]:
    """Top-k as (image_id, index, score), ranked by score then id."""
    by_id = {manifest[idx]: (idx, s) for idx, s in scores}
    ranked = rank_top_k([(manifest[idx], s) for idx, s in scores], k)
    return [(image_id, by_id[image_id][0], score) for image_id, score in ranked]
