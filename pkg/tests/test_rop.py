import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_gray_image, random_rect
from privshare.errors import (
    InvalidKernel,
    InvalidRect,
    ParseError,
    RectMismatch,
    UnsupportedFormat,
)
from privshare.rop import (
    GrayImage,
    RopRect,
    SecretPart,
    box_blur_region,
    crop,
    default_blur_kernel,
    load_rop_fixture,
    pgm_from_bytes,
    pgm_to_bytes,
    recover,
    secret_part_from_bytes,
    secret_part_to_bytes,
    separate_blur,
    separate_mask,
)


def naive_box_blur(img, rect, kernel):
    """Independent double-loop oracle with edge replication."""
    half = kernel // 2
    out = []
    for y in range(rect.top, rect.bottom):
        for x in range(rect.left, rect.right):
            total = 0
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    cx = min(max(x + dx, rect.left), rect.right - 1)
                    cy = min(max(y + dy, rect.top), rect.bottom - 1)
                    total += img.at(cx, cy)
            out.append(total // (kernel * kernel))
    return out


# ---- mask ----

def test_mask_all_zero_image():
    img = GrayImage(8, 8, bytes(64))
    public, secret = separate_mask(img, RopRect(2, 2, 6, 6))
    assert public == img
    assert all(off == 0 for off in secret.offsets)


def test_mask_constant_region():
    img = GrayImage(8, 8, bytes([200] * 64))
    rect = RopRect(1, 1, 4, 5)
    public, secret = separate_mask(img, rect)
    assert all(off == 200 for off in secret.offsets)
    for y in range(rect.top, rect.bottom):
        for x in range(rect.left, rect.right):
            assert public.at(x, y) == 0


def test_mask_region_carries_zero_information(rng):
    img = random_gray_image(rng)
    rect = random_rect(rng, img)
    public, _ = separate_mask(img, rect)
    assert all(public.at(x, y) == 0
               for y in range(rect.top, rect.bottom)
               for x in range(rect.left, rect.right))


def test_mask_round_trip_randomized(rng):
    for _ in range(25):
        img = random_gray_image(rng)
        rect = random_rect(rng, img)
        public, secret = separate_mask(img, rect)
        assert recover(public, secret) == img


# ---- blur ----

def test_blur_constant_region_is_fixed_point():
    img = GrayImage(10, 10, bytes([77] * 100))
    public, secret = separate_blur(img, RopRect(1, 1, 9, 9), kernel=3)
    assert public == img
    assert all(off == 0 for off in secret.offsets)


def test_blur_hand_convolution():
    img = GrayImage(3, 3, bytes(range(9)))
    rect = RopRect(0, 0, 3, 3)
    blurred = box_blur_region(img, rect, 3)
    assert blurred[4] == 4  # mean of 0..8
    _, secret = separate_blur(img, rect, kernel=3)
    assert secret.offsets[4] == img.at(1, 1) - 4


def test_blur_matches_naive_oracle(rng):
    for _ in range(10):
        img = random_gray_image(rng, width=rng.randrange(12, 40),
                                height=rng.randrange(12, 40))
        rect = random_rect(rng, img)
        for kernel in (3, 5):
            assert box_blur_region(img, rect, kernel) == naive_box_blur(img, rect, kernel)


def test_blur_round_trip_randomized(rng):
    for _ in range(25):
        img = random_gray_image(rng)
        rect = random_rect(rng, img)
        public, secret = separate_blur(img, rect)
        assert recover(public, secret) == img


def test_blur_offsets_near_zero_mean(rng):
    img = random_gray_image(rng, width=96, height=96)
    _, secret = separate_blur(img, RopRect(0, 0, 96, 96), kernel=5)
    mean = sum(secret.offsets) / len(secret.offsets)
    assert abs(mean) <= 1.0


def test_default_kernel_rule():
    assert default_blur_kernel(RopRect(0, 0, 10, 10)) == 3      # 10//4=2 -> min 3
    assert default_blur_kernel(RopRect(0, 0, 40, 60)) == 9      # 40//4=10 -> 9
    assert default_blur_kernel(RopRect(0, 0, 28, 100)) == 7     # 28//4=7
    k = default_blur_kernel(RopRect(0, 0, 13, 13))
    assert k % 2 == 1 and k >= 3


def test_blur_invalid_kernel():
    img = GrayImage(10, 10, bytes(100))
    with pytest.raises(InvalidKernel):
        separate_blur(img, RopRect(0, 0, 5, 5), kernel=4)
    with pytest.raises(InvalidKernel):
        separate_blur(img, RopRect(0, 0, 5, 5), kernel=1)


# ---- recover and validation ----

def test_invalid_rect_rejected():
    img = GrayImage(8, 8, bytes(64))
    with pytest.raises(InvalidRect):
        separate_mask(img, RopRect(0, 0, 9, 4))
    with pytest.raises(InvalidRect):
        RopRect(4, 0, 4, 4)


def test_tampered_offsets_rejected():
    with pytest.raises(ValueError):
        SecretPart(RopRect(0, 0, 1, 1), (300,))
    with pytest.raises(ValueError):
        SecretPart(RopRect(0, 0, 1, 1), (-256,))


def test_recover_rect_outside_image():
    img = GrayImage(4, 4, bytes(16))
    secret = SecretPart(RopRect(0, 0, 6, 6), (0,) * 36)
    with pytest.raises(RectMismatch):
        recover(img, secret)


def test_recover_overflow_detected():
    public = GrayImage(2, 1, bytes([250, 0]))
    secret = SecretPart(RopRect(0, 0, 2, 1), (10, 0))
    with pytest.raises(RectMismatch):
        recover(public, secret)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_separation_round_trip_property(seed):
    import random

    rng = random.Random(seed)
    img = random_gray_image(rng, width=rng.randrange(6, 24),
                            height=rng.randrange(6, 24))
    rect = random_rect(rng, img)
    for method in (separate_mask, separate_blur):
        public, secret = method(img, rect)
        assert recover(public, secret) == img


def test_crop():
    img = GrayImage(4, 3, bytes(range(12)))
    sub = crop(img, RopRect(1, 1, 3, 3))
    assert sub.width == 2 and sub.height == 2
    assert list(sub.pixels) == [5, 6, 9, 10]


# ---- PGM ----

def test_pgm_round_trip(rng, tmp_path):
    img = random_gray_image(rng)
    raw = pgm_to_bytes(img)
    assert pgm_from_bytes(raw) == img


def test_pgm_rejects_color():
    with pytest.raises(UnsupportedFormat):
        pgm_from_bytes(b"P6\n2 2\n255\n" + bytes(12))


def test_pgm_rejects_wrong_maxval():
    with pytest.raises(UnsupportedFormat):
        pgm_from_bytes(b"P5\n2 2\n128\n" + bytes(4))


def test_pgm_rejects_truncated():
    with pytest.raises(ParseError):
        pgm_from_bytes(b"P5\n4 4\n255\n" + bytes(7))


def test_pgm_handles_comments():
    raw = b"P5\n# a comment\n2 2\n255\n" + bytes([1, 2, 3, 4])
    img = pgm_from_bytes(raw)
    assert img.width == 2 and list(img.pixels) == [1, 2, 3, 4]


# ---- secret part bytes & fixtures ----

def test_secret_part_bytes_round_trip(rng):
    img = random_gray_image(rng)
    rect = random_rect(rng, img)
    _, secret = separate_blur(img, rect)
    assert secret_part_from_bytes(secret_part_to_bytes(secret)) == secret


def test_rop_fixture_parse(tmp_path):
    path = tmp_path / "rects.txt"
    path.write_text("# comment\nimg0 1 2 10 12\nimg1 0 0 4 4\n")
    rects = load_rop_fixture(path)
    assert rects["img0"] == RopRect(1, 2, 10, 12)
    assert len(rects) == 2


def test_rop_fixture_rejects_bad_line(tmp_path):
    path = tmp_path / "rects.txt"
    path.write_text("img0 1 2 10\n")
    with pytest.raises(ParseError):
        load_rop_fixture(path)
