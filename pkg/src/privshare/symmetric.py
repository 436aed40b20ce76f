"""Authenticated symmetric encryption used for gate payloads, key
envelopes, sealed secret parts, and transfer payloads.  AES-GCM with the
12-byte nonce prepended to the ciphertext."""

from __future__ import annotations

import random

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

NONCE_LEN = 12
KEY_LEN = 16

_sysrand = random.SystemRandom()


def random_key(rng: random.Random | None = None) -> bytes:
    rng = rng or _sysrand
    return rng.getrandbits(8 * KEY_LEN).to_bytes(KEY_LEN, "big")


def aead_encrypt(key: bytes, plaintext: bytes,
                 rng: random.Random | None = None,
                 aad: bytes | None = None) -> bytes:
    rng = rng or _sysrand
    nonce = rng.getrandbits(8 * NONCE_LEN).to_bytes(NONCE_LEN, "big")
    return nonce + AESGCM(key).encrypt(nonce, plaintext, aad)


def aead_decrypt(key: bytes, blob: bytes, aad: bytes | None = None) -> bytes:
    """Raises ValueError when the key is wrong or the blob was tampered."""
    if len(blob) < NONCE_LEN:
        raise ValueError("ciphertext too short")
    try:
        return AESGCM(key).decrypt(blob[:NONCE_LEN], blob[NONCE_LEN:], aad)
    except InvalidTag as exc:
        raise ValueError("authentication failed") from exc
