"""Region-of-privacy separation: mask or blur a rectangle out of a photo
and keep pixel offsets so the original is recoverable bit-exact.
Includes minimal binary PGM (P5) image I/O.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import (
    InvalidKernel,
    InvalidRect,
    ParseError,
    RectMismatch,
    UnsupportedFormat,
)


@dataclass(frozen=True)
class GrayImage:
    width: int
    height: int
    pixels: bytes  # row-major 8-bit intensities

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if len(self.pixels) != self.width * self.height:
            raise ValueError("pixel buffer does not match dimensions")

    def at(self, x: int, y: int) -> int:
        return self.pixels[y * self.width + x]


@dataclass(frozen=True)
class RopRect:
    """Rectangle given by top-left (inclusive) and bottom-right (exclusive)."""

    left: int
    top: int
    right: int
    bottom: int

    def __post_init__(self):
        if not (0 <= self.left < self.right and 0 <= self.top < self.bottom):
            raise InvalidRect(f"degenerate rectangle {self}")

    @property
    def width(self) -> int:
        return self.right - self.left

    @property
    def height(self) -> int:
        return self.bottom - self.top

    @property
    def area(self) -> int:
        return self.width * self.height

    def check_inside(self, img: GrayImage) -> None:
        if self.right > img.width or self.bottom > img.height:
            raise InvalidRect(
                f"rect {self} exceeds {img.width}x{img.height} image"
            )


@dataclass(frozen=True)
class SecretPart:
    """Row-major pixel offsets that restore the original rectangle."""

    rect: RopRect
    offsets: tuple[int, ...]

    def __post_init__(self):
        if len(self.offsets) != self.rect.area:
            raise ValueError("offset count does not match rect area")
        for off in self.offsets:
            if not -255 <= off <= 255:
                raise ValueError(f"offset {off} outside [-255, 255]")


def separate_mask(img: GrayImage, rect: RopRect) -> tuple[GrayImage, SecretPart]:
    """Blank the rectangle to zero; offsets are the original pixel values."""
    rect.check_inside(img)
    buf = bytearray(img.pixels)
    offsets = []
    for y in range(rect.top, rect.bottom):
        row = y * img.width
        for x in range(rect.left, rect.right):
            offsets.append(buf[row + x])
            buf[row + x] = 0
    return GrayImage(img.width, img.height, bytes(buf)), SecretPart(rect, tuple(offsets))


def default_blur_kernel(rect: RopRect) -> int:
    """Largest odd kernel <= max(3, min(side)/4); grows with the rectangle."""
    base = max(3, min(rect.width, rect.height) // 4)
    return base if base % 2 == 1 else base - 1


def box_blur_region(img: GrayImage, rect: RopRect, kernel: int) -> list[int]:
    """Box-filter the rectangle's sub-image, replicating its own edges.

    Exact integer means (floor division), computed with a summed-area table
    over the edge-padded sub-image.
    """
    half = kernel // 2
    rw, rh = rect.width, rect.height
    pw, ph = rw + 2 * half, rh + 2 * half

    def src(x: int, y: int) -> int:
        cx = min(max(x, 0), rw - 1) + rect.left
        cy = min(max(y, 0), rh - 1) + rect.top
        return img.pixels[cy * img.width + cx]

    # sat[y][x] = sum of padded sub-image over [0,x) x [0,y)
    sat = [[0] * (pw + 1) for _ in range(ph + 1)]
    for y in range(ph):
        acc = 0
        row = sat[y + 1]
        prev = sat[y]
        for x in range(pw):
            acc += src(x - half, y - half)
            row[x + 1] = prev[x + 1] + acc

    area = kernel * kernel
    out = []
    for y in range(rh):
        for x in range(rw):
            x0, y0 = x, y                    # padded coords of window corner
            x1, y1 = x + kernel, y + kernel
            s = sat[y1][x1] - sat[y0][x1] - sat[y1][x0] + sat[y0][x0]
            out.append(s // area)
    return out


def separate_blur(img: GrayImage, rect: RopRect,
                  kernel: int | None = None) -> tuple[GrayImage, SecretPart]:
    """Replace the rectangle with its box-filtered version; offsets are the
    per-pixel difference original - blurred."""
    rect.check_inside(img)
    if kernel is None:
        kernel = default_blur_kernel(rect)
    if kernel < 3 or kernel % 2 == 0:
        raise InvalidKernel(f"kernel {kernel} must be odd and >= 3")
    blurred = box_blur_region(img, rect, kernel)
    buf = bytearray(img.pixels)
    offsets = []
    i = 0
    for y in range(rect.top, rect.bottom):
        row = y * img.width
        for x in range(rect.left, rect.right):
            b = blurred[i]
            offsets.append(buf[row + x] - b)
            buf[row + x] = b
            i += 1
    return GrayImage(img.width, img.height, bytes(buf)), SecretPart(rect, tuple(offsets))


def crop(img: GrayImage, rect: RopRect) -> GrayImage:
    """Copy of the rectangle's sub-image."""
    rect.check_inside(img)
    rows = []
    for y in range(rect.top, rect.bottom):
        start = y * img.width + rect.left
        rows.append(img.pixels[start:start + rect.width])
    return GrayImage(rect.width, rect.height, b"".join(rows))


def recover(public_img: GrayImage, secret: SecretPart) -> GrayImage:
    """Add the offsets back inside the rectangle; bit-exact inverse of both
    separations for honestly produced inputs."""
    rect = secret.rect
    try:
        rect.check_inside(public_img)
    except InvalidRect as exc:
        raise RectMismatch(str(exc)) from exc
    buf = bytearray(public_img.pixels)
    i = 0
    for y in range(rect.top, rect.bottom):
        row = y * public_img.width
        for x in range(rect.left, rect.right):
            v = buf[row + x] + secret.offsets[i]
            if not 0 <= v <= 255:
                raise RectMismatch(
                    f"pixel ({x},{y}) recovers to {v}, outside [0, 255]"
                )
            buf[row + x] = v
            i += 1
    return GrayImage(public_img.width, public_img.height, bytes(buf))


# ---- PGM (P5) I/O ----

def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data):
        if data[pos:pos + 1].isspace():
            pos += 1
        elif data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ParseError(f"unexpected end of header at byte {start}")
    return data[start:pos], pos


def pgm_from_bytes(data: bytes) -> GrayImage:
    magic, pos = _next_token(data, 0)
    if magic == b"P6":
        raise UnsupportedFormat("color PPM (P6) not supported, expected P5")
    if magic != b"P5":
        raise ParseError(f"bad magic {magic!r}, expected P5")
    fields = []
    for _ in range(3):
        tok, pos = _next_token(data, pos)
        if not tok.isdigit():
            raise ParseError(f"non-numeric header field {tok!r} at byte {pos}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedFormat(f"maxval {maxval} not supported, expected 255")
    pos += 1  # single whitespace after maxval
    pixels = data[pos:pos + width * height]
    if len(pixels) != width * height:
        raise ParseError(
            f"expected {width * height} pixel bytes, found {len(pixels)}"
        )
    return GrayImage(width, height, pixels)


def pgm_to_bytes(img: GrayImage) -> bytes:
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.pixels


def load_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        return pgm_from_bytes(fh.read())


def save_pgm(img: GrayImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(pgm_to_bytes(img))


# ---- secret-part byte form (sealed inside the private bag) ----

def secret_part_to_bytes(secret: SecretPart) -> bytes:
    r = secret.rect
    head = struct.pack(">4I", r.left, r.top, r.right, r.bottom)
    body = struct.pack(f">{len(secret.offsets)}h", *secret.offsets)
    return head + body


def secret_part_from_bytes(raw: bytes) -> SecretPart:
    if len(raw) < 16:
        raise ParseError("secret part truncated")
    left, top, right, bottom = struct.unpack(">4I", raw[:16])
    rect = RopRect(left, top, right, bottom)
    count = rect.area
    if len(raw) != 16 + 2 * count:
        raise ParseError("secret part length does not match rect area")
    offsets = struct.unpack(f">{count}h", raw[16:])
    return SecretPart(rect, offsets)


def load_rop_fixture(path) -> dict[str, RopRect]:
    """One `image_id tl_x tl_y br_x br_y` entry per line."""
    rects = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ParseError(f"line {lineno}: expected 5 fields, got {len(parts)}")
            try:
                coords = [int(v) for v in parts[1:]]
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
            rects[parts[0]] = RopRect(*coords)
    return rects
