"""Microbenchmark harness for the per-vector protocol costs: owner-side
descriptor encryption, querier-side encoding, one cloud distance fold,
and one distance decryption."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

from . import paillier, search_bin, search_real
from .descriptor import BINARY, Descriptor, FeatureVector, REAL

CSV_HEADER = "operation,variant,dim,mean_ms,min_ms,max_ms"


@dataclass(frozen=True)
class BenchRow:
    operation: str
    variant: str
    dim: int
    mean_ms: float
    min_ms: float
    max_ms: float

    def csv(self) -> str:
        return (f"{self.operation},{self.variant},{self.dim},"
                f"{self.mean_ms:.3f},{self.min_ms:.3f},{self.max_ms:.3f}")


def _timed(fn, trials: int) -> tuple[float, float, float]:
    samples = []
    for _ in range(trials):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000.0)
    return sum(samples) / len(samples), min(samples), max(samples)


def _row(op: str, variant: str, dim: int, fn, trials: int) -> BenchRow:
    mean, lo, hi = _timed(fn, trials)
    return BenchRow(op, variant, dim, mean, lo, hi)


def run_bench(variant: str, dim: int, trials: int = 10,
              prime_bits: int = paillier.DEFAULT_PRIME_BITS,
              rng: random.Random | None = None) -> list[BenchRow]:
    rng = rng or random.SystemRandom()
    rows = []
    if variant == REAL:
        keys = search_real.gen_search_keys(dim, prime_bits, rng=rng)
        vec = Descriptor((FeatureVector(tuple(rng.uniform(-1, 1) for _ in range(dim))),), REAL)
        qvec = Descriptor((FeatureVector(tuple(rng.uniform(-1, 1) for _ in range(dim))),), REAL)
        bag = search_real.owner_encrypt_descriptor(vec, keys, rng)
        enc = search_real.querier_encode(qvec, keys, rng)
        dist = search_real.cloud_distance((bag.sq[0], bag.rx[0]),
                                          (enc.c1[0], enc.c2[0]), keys.public_key)
        rows.append(_row("encrypt_vector_owner", variant, dim,
                         lambda: search_real.owner_encrypt_descriptor(vec, keys, rng),
                         trials))
        rows.append(_row("encode_vector_querier", variant, dim,
                         lambda: search_real.querier_encode(qvec, keys, rng),
                         trials))
        rows.append(_row("cloud_distance_pair", variant, dim,
                         lambda: search_real.cloud_distance(
                             (bag.sq[0], bag.rx[0]), (enc.c1[0], enc.c2[0]),
                             keys.public_key),
                         trials))
        rows.append(_row("decrypt_distance", variant, dim,
                         lambda: search_real.decrypt_distance(
                             keys.secret_key, dist.value, keys.public_key),
                         trials))
    elif variant == BINARY:
        keys = search_bin.gen_search_keys_bin(prime_bits, rng=rng)
        vec = FeatureVector(tuple(rng.getrandbits(1) for _ in range(dim)))
        qvec = FeatureVector(tuple(rng.getrandbits(1) for _ in range(dim)))
        gates = search_bin.garble_vector(vec, keys, rng)
        ginput = search_bin.encode_query(qvec, keys)
        dist = search_bin.cloud_eval(gates, ginput, keys.public_key)
        rows.append(_row("encrypt_vector_owner", variant, dim,
                         lambda: search_bin.garble_vector(vec, keys, rng), trials))
        rows.append(_row("encode_vector_querier", variant, dim,
                         lambda: search_bin.encode_query(qvec, keys), trials))
        rows.append(_row("cloud_distance_pair", variant, dim,
                         lambda: search_bin.cloud_eval(gates, ginput, keys.public_key),
                         trials))
        rows.append(_row("decrypt_distance", variant, dim,
                         lambda: paillier.decrypt(keys.secret_key, dist), trials))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return rows


def to_csv(rows: list[BenchRow]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv() for r in rows]) + "\n"
