"""Policy-gated key distribution: a boolean AND/OR tree over attribute
names protects a data-encryption key by secret sharing (AND splits a share
by XOR, OR replicates it), with each leaf share wrapped under a key the
authority derives from its per-attribute master secret.

This stands in for pairing-based attribute encryption behind the same
wrap/unwrap surface.  Known limitation, by construction: users holding
complementary attribute sets can pool credentials (no collusion
resistance).  The envelope carries a scheme identifier so a stronger
backend can replace this one.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import random
from dataclasses import dataclass

from .errors import AccessDenied, IntegrityFailure, ParseError
from .symmetric import KEY_LEN, aead_decrypt, aead_encrypt, random_key
from .wire import b64d, b64e

SCHEME_ID = "policy-tree-xor-v1"

_sysrand = random.SystemRandom()

AND = "AND"
OR = "OR"
ATTR = "ATTR"


@dataclass(frozen=True)
class PolicyNode:
    op: str
    attr: str | None = None
    children: tuple["PolicyNode", ...] = ()

    def __post_init__(self):
        if self.op == ATTR:
            if not self.attr or self.children:
                raise ValueError("attribute leaf needs a name and no children")
        elif self.op in (AND, OR):
            if len(self.children) < 2 or self.attr is not None:
                raise ValueError(f"{self.op} node needs >= 2 children")
        else:
            raise ValueError(f"unknown node op {self.op!r}")

    def leaves(self) -> list["PolicyNode"]:
        if self.op == ATTR:
            return [self]
        out = []
        for child in self.children:
            out.extend(child.leaves())
        return out


def evaluate_policy(policy: PolicyNode, attrs: set[str]) -> bool:
    if policy.op == ATTR:
        return policy.attr in attrs
    results = (evaluate_policy(c, attrs) for c in policy.children)
    return all(results) if policy.op == AND else any(results)


def policy_to_string(policy: PolicyNode) -> str:
    if policy.op == ATTR:
        return policy.attr
    return f"{policy.op}({','.join(policy_to_string(c) for c in policy.children)})"


def parse_policy(text: str) -> PolicyNode:
    """Parse `AND(friend,OR(family,coworker))`-style expressions."""
    pos = 0

    def error(msg: str):
        return ParseError(f"policy position {pos}: {msg}")

    def parse_node() -> PolicyNode:
        nonlocal pos
        start = pos
        while pos < len(text) and (text[pos].isalnum() or text[pos] in "_-."):
            pos += 1
        name = text[start:pos]
        if not name:
            raise error("expected attribute or operator name")
        if pos < len(text) and text[pos] == "(":
            if name not in (AND, OR):
                raise error(f"unknown operator {name!r}")
            pos += 1
            children = [parse_node()]
            while pos < len(text) and text[pos] == ",":
                pos += 1
                children.append(parse_node())
            if pos >= len(text) or text[pos] != ")":
                raise error("expected ')' or ','")
            pos += 1
            return PolicyNode(name, children=tuple(children))
        return PolicyNode(ATTR, attr=name)

    node = parse_node()
    if pos != len(text):
        raise error(f"trailing input {text[pos:]!r}")
    return node


# ---- authority and credentials ----

@dataclass(frozen=True)
class AuthorityState:
    """Holds the master secret from which per-attribute keys derive."""

    master_secret: bytes


@dataclass(frozen=True)
class AttributeCredential:
    user_id: str
    attribute: str
    secret: bytes   # attribute unwrap key
    binding: bytes  # ties this credential object to user_id


def new_authority(rng: random.Random | None = None) -> AuthorityState:
    rng = rng or _sysrand
    return AuthorityState(rng.getrandbits(256).to_bytes(32, "big"))


def _attribute_key(authority: AuthorityState, attribute: str) -> bytes:
    mac = hmac.new(authority.master_secret, b"attr|" + attribute.encode(), hashlib.sha256)
    return mac.digest()[:KEY_LEN]


def issue_credential(authority: AuthorityState, user_id: str,
                     attribute: str) -> AttributeCredential:
    secret = _attribute_key(authority, attribute)
    binding = hmac.new(secret, b"user|" + user_id.encode(), hashlib.sha256).digest()[:KEY_LEN]
    return AttributeCredential(user_id, attribute, secret, binding)


def _verify_credential(cred: AttributeCredential) -> bool:
    want = hmac.new(cred.secret, b"user|" + cred.user_id.encode(), hashlib.sha256).digest()[:KEY_LEN]
    return hmac.compare_digest(want, cred.binding)


# ---- envelopes ----

@dataclass(frozen=True)
class KeyEnvelope:
    policy: PolicyNode
    shares: tuple[tuple[str, bytes], ...]  # (attribute, wrapped share) per leaf
    payload: bytes
    scheme: str = SCHEME_ID


def _split_shares(policy: PolicyNode, share: bytes, rng: random.Random,
                  out: list[tuple[str, bytes]]) -> None:
    if policy.op == ATTR:
        out.append((policy.attr, share))
        return
    if policy.op == OR:
        for child in policy.children:
            _split_shares(child, share, rng, out)
        return
    # AND: XOR-split so every child share is required
    parts = [rng.getrandbits(8 * KEY_LEN).to_bytes(KEY_LEN, "big")
             for _ in policy.children[:-1]]
    last = share
    for part in parts:
        last = bytes(a ^ b for a, b in zip(last, part))
    for child, part in zip(policy.children, parts + [last]):
        _split_shares(child, part, rng, out)


def wrap(policy: PolicyNode, payload: bytes, authority: AuthorityState,
         rng: random.Random | None = None) -> KeyEnvelope:
    """Encrypt payload under a fresh key recoverable only by credential
    sets satisfying the policy."""
    rng = rng or _sysrand
    dek = random_key(rng)
    plain_shares: list[tuple[str, bytes]] = []
    _split_shares(policy, dek, rng, plain_shares)
    wrapped = tuple(
        (attr, aead_encrypt(_attribute_key(authority, attr), share, rng))
        for attr, share in plain_shares
    )
    sealed = aead_encrypt(dek, payload, rng, aad=policy_to_string(policy).encode())
    return KeyEnvelope(policy, wrapped, sealed)


def _recover_share(policy: PolicyNode, keys: dict[str, bytes],
                   shares: list[tuple[str, bytes]], cursor: list[int]) -> bytes | None:
    if policy.op == ATTR:
        attr, wrapped = shares[cursor[0]]
        cursor[0] += 1
        if attr in keys:
            try:
                return aead_decrypt(keys[attr], wrapped)
            except ValueError:
                return None
        return None
    if policy.op == OR:
        got = None
        for child in policy.children:
            part = _recover_share(child, keys, shares, cursor)
            if part is not None and got is None:
                got = part
        return got
    parts = [_recover_share(child, keys, shares, cursor) for child in policy.children]
    if any(p is None for p in parts):
        return None
    acc = parts[0]
    for part in parts[1:]:
        acc = bytes(a ^ b for a, b in zip(acc, part))
    return acc


def unwrap(envelope: KeyEnvelope, credentials: list[AttributeCredential]) -> bytes:
    """Recover the payload; AccessDenied unless the credentials satisfy the
    policy, IntegrityFailure if the payload was tampered."""
    keys = {}
    for cred in credentials:
        if not _verify_credential(cred):
            raise AccessDenied(f"credential for {cred.attribute!r} fails verification")
        keys[cred.attribute] = cred.secret
    dek = _recover_share(envelope.policy, keys, list(envelope.shares), [0])
    if dek is None:
        raise AccessDenied("attributes do not satisfy the policy")
    try:
        return aead_decrypt(dek, envelope.payload,
                            aad=policy_to_string(envelope.policy).encode())
    except ValueError as exc:
        raise IntegrityFailure("envelope payload failed authentication") from exc


# ---- sealing the secret region ----

def seal_secret_rop(secret_bytes: bytes, k_e: bytes,
                    rng: random.Random | None = None) -> bytes:
    return aead_encrypt(k_e, secret_bytes, rng)


def open_secret_rop(blob: bytes, k_e: bytes) -> bytes:
    try:
        return aead_decrypt(k_e, blob)
    except ValueError as exc:
        raise IntegrityFailure("sealed secret part failed authentication") from exc


# ---- envelope serialization ----

def envelope_to_json(env: KeyEnvelope) -> dict:
    return {
        "payload": b64e(env.payload),
        "policy": policy_to_string(env.policy),
        "scheme": env.scheme,
        "shares": [[attr, b64e(blob)] for attr, blob in env.shares],
    }


def envelope_from_json(obj: dict) -> KeyEnvelope:
    return KeyEnvelope(
        policy=parse_policy(obj["policy"]),
        shares=tuple((attr, b64d(blob)) for attr, blob in obj["shares"]),
        payload=b64d(obj["payload"]),
        scheme=obj.get("scheme", SCHEME_ID),
    )


def envelope_to_bytes(env: KeyEnvelope) -> bytes:
    return json.dumps(envelope_to_json(env), sort_keys=True).encode()


def envelope_from_bytes(raw: bytes) -> KeyEnvelope:
    return envelope_from_json(json.loads(raw.decode()))
