import itertools
import random

import pytest
from hypothesis import given, strategies as st

from privshare.descriptor import (
    BINARY,
    Descriptor,
    FeatureVector,
    MatchThreshold,
    REAL,
    euclid_sq,
    hamming,
    load_descriptor,
    rank_top_k,
    ratio_match,
    ratio_match_distances,
    save_descriptor,
    similarity,
    toy_extract,
)
from privshare.errors import DimMismatch, ImageTooSmall, ParseError
from privshare.rop import GrayImage


def fv(*values):
    return FeatureVector(tuple(values))


def real_desc(*vectors):
    return Descriptor(tuple(FeatureVector(tuple(v)) for v in vectors), REAL)


# ---- distances ----

def test_euclid_sq_identical_is_zero():
    assert euclid_sq(fv(1.0, 2.0), fv(1.0, 2.0)) == 0


def test_euclid_sq_hand_value():
    assert euclid_sq(fv(1, 0), fv(0, 1)) == 2


def test_euclid_sq_dim_mismatch():
    with pytest.raises(DimMismatch):
        euclid_sq(fv(1, 2), fv(1, 2, 3))


def test_euclid_sq_against_reversed_summation_oracle(rng):
    x = fv(*(rng.uniform(-1, 1) for _ in range(64)))
    y = fv(*(rng.uniform(-1, 1) for _ in range(64)))
    oracle = sum((a - b) ** 2
                 for a, b in reversed(list(zip(x.values, y.values))))
    assert euclid_sq(x, y) == pytest.approx(oracle, rel=1e-12)


def test_hamming_hand_values():
    assert hamming(fv(0, 1, 0, 1), fv(0, 1, 0, 1)) == 0
    assert hamming(fv(0, 1, 0, 1), fv(1, 0, 1, 0)) == 4


def test_hamming_equals_euclid_on_lifted_bits_exhaustive():
    for dim in (2, 4, 8):
        for xb in itertools.product((0, 1), repeat=dim):
            for yb in itertools.product((0, 1), repeat=dim):
                assert hamming(fv(*xb), fv(*yb)) == euclid_sq(fv(*xb), fv(*yb))


def test_hamming_equals_euclid_on_lifted_bits_randomized(rng):
    for dim in (64, 128):
        for _ in range(50):
            xb = fv(*(rng.getrandbits(1) for _ in range(dim)))
            yb = fv(*(rng.getrandbits(1) for _ in range(dim)))
            assert hamming(xb, yb) == euclid_sq(xb, yb)


# ---- ratio test ----

def test_ratio_match_finds_exact_copy():
    x = fv(1.0, 2.0)
    Y = real_desc((5.0, 5.0), (1.0, 2.0), (9.0, -3.0))
    is_match, nn = ratio_match(x, Y)
    assert is_match and nn == 1


def test_ratio_match_hand_cases():
    # d_nn = 3, d_2nn = 5: 9 >= 0.25 * 25, no match
    assert ratio_match_distances([9, 25], alpha=0.5)[0] is False
    # d_nn = 1, d_2nn = 3: 1 < 0.25 * 9
    assert ratio_match_distances([1, 9], alpha=0.5)[0] is True


def test_ratio_match_single_candidate():
    assert ratio_match_distances([4], alpha=0.5)[0] is False
    assert ratio_match_distances([0], alpha=0.5)[0] is True


def test_ratio_match_duplicate_zero_distances():
    assert ratio_match_distances([0, 0], alpha=0.5) == (True, 0)


@given(st.integers(min_value=1, max_value=40))
def test_ratio_match_scale_invariance(seed):
    rng = random.Random(seed)
    dim = 8
    x = fv(*(rng.uniform(-1, 1) for _ in range(dim)))
    Y = real_desc(*[[rng.uniform(-1, 1) for _ in range(dim)] for _ in range(5)])
    scale = rng.uniform(0.1, 50.0)
    x2 = fv(*(scale * v for v in x.values))
    Y2 = real_desc(*[[scale * v for v in y.values] for y in Y.vectors])
    assert ratio_match(x, Y)[0] == ratio_match(x2, Y2)[0]


# ---- similarity ----

def _brute_similarity(X, Y, alpha):
    count = 0
    for x in X.vectors:
        dists = sorted(euclid_sq(x, y) for y in Y.vectors)
        if dists[0] == 0:
            count += 1
        elif len(dists) > 1 and dists[0] < alpha * alpha * dists[1]:
            count += 1
    return count


def test_similarity_self_match_with_distant_vectors():
    X = real_desc((0.0, 0.0), (10.0, 0.0), (0.0, 10.0))
    assert similarity(X, X) == 3


def test_similarity_matches_brute_force_oracle(rng):
    for _ in range(20):
        X = real_desc(*[[rng.uniform(-1, 1) for _ in range(8)] for _ in range(9)])
        Y = real_desc(*[[rng.uniform(-1, 1) for _ in range(8)] for _ in range(9)])
        assert similarity(X, Y) == _brute_similarity(X, Y, 0.5)


def test_similarity_zero_for_equidistant_far_targets():
    X = real_desc((0.1, 0.0), (0.0, 0.2), (-0.1, 0.1))
    Y = real_desc((50.0, 0.0), (-50.0, 0.0))
    assert similarity(X, Y) == 0


def test_similarity_bounded_by_size(rng):
    X = real_desc(*[[rng.uniform(-1, 1) for _ in range(4)] for _ in range(6)])
    Y = real_desc(*[[rng.uniform(-1, 1) for _ in range(4)] for _ in range(3)])
    assert similarity(X, Y) <= len(X)


# ---- ranking ----

def test_rank_top_k_tie_breaks_by_id():
    scores = [("c", 1), ("a", 1), ("b", 1)]
    assert rank_top_k(scores, 2) == [("a", 1), ("b", 1)]


def test_rank_top_k_hand_case():
    scores = [("a", 3), ("b", 5), ("c", 1)]
    assert [i for i, _ in rank_top_k(scores, 2)] == ["b", "a"]


def test_rank_top_k_zero():
    assert rank_top_k([("a", 1)], 0) == []


def test_rank_top_k_rejects_oversized_k():
    with pytest.raises(ValueError):
        rank_top_k([("a", 1)], 2)


def test_rank_top_k_deterministic(rng):
    scores = [(f"img{i:03d}", rng.randrange(5)) for i in range(30)]
    assert rank_top_k(scores, 10) == rank_top_k(list(scores), 10)


# ---- toy extractor ----

def test_toy_extract_uniform_image_single_bin():
    img = GrayImage(16, 16, bytes([200]) * 256)
    desc = toy_extract(img, 2)
    for vec in desc.vectors:
        assert vec.values[200 >> 2] == 1.0
        assert sum(vec.values) == 1.0


def test_toy_extract_identical_images_full_score(rng):
    img = GrayImage(24, 24, bytes(rng.randrange(256) for _ in range(576)))
    a = toy_extract(img, 3)
    b = toy_extract(img, 3)
    assert similarity(a, b) == 9


def test_toy_extract_shifted_copy_beats_noise(rng):
    w, h = 48, 48
    base = [rng.randrange(256) for _ in range(w * h)]
    img = GrayImage(w, h, bytes(base))
    shifted = GrayImage(w, h, bytes(base[2:] + base[:2]))
    noise = GrayImage(w, h, bytes(rng.randrange(256) for _ in range(w * h)))
    q = toy_extract(img, 3)
    assert similarity(q, toy_extract(shifted, 3)) > similarity(q, toy_extract(noise, 3))


def test_toy_extract_binary_variant(rng):
    img = GrayImage(24, 24, bytes(rng.randrange(256) for _ in range(576)))
    desc = toy_extract(img, 2, BINARY)
    assert desc.variant == BINARY
    assert all(b in (0, 1) for v in desc.vectors for b in v.values)


def test_toy_extract_too_small():
    img = GrayImage(4, 4, bytes(16))
    with pytest.raises(ImageTooSmall):
        toy_extract(img, 5)


# ---- file format ----

def test_descriptor_io_round_trip_real(tmp_path, rng):
    desc = real_desc(*[[rng.uniform(-1, 1) for _ in range(16)] for _ in range(4)])
    path = tmp_path / "d.txt"
    save_descriptor(desc, path)
    assert load_descriptor(path) == desc


def test_descriptor_io_round_trip_binary(tmp_path, rng):
    desc = Descriptor(tuple(FeatureVector(tuple(rng.getrandbits(1) for _ in range(32)))
                            for _ in range(3)), BINARY)
    path = tmp_path / "d.txt"
    save_descriptor(desc, path)
    assert load_descriptor(path) == desc


def test_descriptor_io_malformed_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("real sixtyfour 2\n")
    with pytest.raises(ParseError):
        load_descriptor(path)


def test_descriptor_io_external_128_dim_fixture(tmp_path, rng):
    path = tmp_path / "sift.txt"
    rows = [" ".join(f"{rng.uniform(0, 1):.6f}" for _ in range(128)) for _ in range(5)]
    path.write_text("real 128 5\n" + "\n".join(rows) + "\n")
    desc = load_descriptor(path)
    assert desc.variant == REAL and desc.dim == 128 and len(desc) == 5


def test_match_threshold_validation():
    assert MatchThreshold().alpha == 0.5
    with pytest.raises(ValueError):
        MatchThreshold(1.5)
