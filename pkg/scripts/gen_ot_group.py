#!/usr/bin/env python3
"""Regenerate the Schnorr-style group constants embedded in
privshare/otgroup.py.  Maintenance tool, not a runtime path: transfers
always use the shipped fixture."""

import argparse
import random
import sys

import gmpy2
from gmpy2 import mpz, powmod


def random_prime(bits: int, rng: random.Random) -> mpz:
    while True:
        cand = mpz(rng.getrandbits(bits)) | (mpz(1) << (bits - 1)) | 1
        if gmpy2.is_prime(cand):
            return cand


def generate(p_bits: int, q_bits: int, rng: random.Random) -> tuple[mpz, mpz, mpz]:
    q = random_prime(q_bits, rng)
    m_bits = p_bits - q_bits
    while True:
        m = mpz(rng.getrandbits(m_bits)) | (mpz(1) << (m_bits - 1))
        p = q * m + 1
        if p.bit_length() == p_bits and gmpy2.is_prime(p):
            break
    while True:
        u = mpz(rng.randrange(2, p - 1))
        g = powmod(u, (p - 1) // q, p)
        if g != 1:
            break
    assert powmod(g, q, p) == 1
    return p, q, g


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p-bits", type=int, default=2048)
    ap.add_argument("--q-bits", type=int, default=256)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    rng = random.Random(args.seed) if args.seed is not None else random.SystemRandom()
    p, q, g = generate(args.p_bits, args.q_bits, rng)
    print(f'P_HEX = "{p:x}"')
    print(f'Q_HEX = "{q:x}"')
    print(f'G_HEX = "{g:x}"')
    return 0


if __name__ == "__main__":
    sys.exit(main())
