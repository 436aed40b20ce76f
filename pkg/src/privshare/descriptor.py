"""Plaintext feature vectors, distances, the nearest/second-nearest ratio
test, and similarity scoring.  This module is the brute-force reference the
encrypted pipeline is checked against.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import DimMismatch, ImageTooSmall, ParseError
from .rop import GrayImage

REAL = "real"
BINARY = "binary"

TOY_DIM = 64  # histogram bins per block in the toy extractor


@dataclass(frozen=True)
class FeatureVector:
    values: tuple

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Descriptor:
    vectors: tuple[FeatureVector, ...]
    variant: str

    def __post_init__(self):
        if self.variant not in (REAL, BINARY):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.vectors:
            raise ValueError("descriptor needs at least one vector")
        dim = self.vectors[0].dim
        for v in self.vectors:
            if v.dim != dim:
                raise DimMismatch("descriptor vectors have mixed dimensions")
            if self.variant == BINARY and any(b not in (0, 1) for b in v.values):
                raise ValueError("binary descriptor values must be 0/1")

    @property
    def dim(self) -> int:
        return self.vectors[0].dim

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class MatchThreshold:
    """Nearest/second-nearest distance ratio bound."""

    alpha: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")


def euclid_sq(x: FeatureVector, y: FeatureVector):
    """Squared Euclidean distance; exact for integer components."""
    if x.dim != y.dim:
        raise DimMismatch(f"{x.dim} vs {y.dim}")
    return sum((a - b) * (a - b) for a, b in zip(x.values, y.values))


def hamming(x: FeatureVector, y: FeatureVector) -> int:
    """Number of differing bits; equals euclid_sq on 0/1 vectors."""
    if x.dim != y.dim:
        raise DimMismatch(f"{x.dim} vs {y.dim}")
    return sum(a ^ b for a, b in zip(x.values, y.values))


def _dist_sq(x: FeatureVector, y: FeatureVector, variant: str):
    return hamming(x, y) if variant == BINARY else euclid_sq(x, y)


def ratio_match_distances(d2_row: Sequence, alpha: float = 0.5) -> tuple[bool, int]:
    """Ratio test over precomputed squared distances to one descriptor.

    Equivalent to d_nn/d_2nn < alpha in the squared domain:
    d2_nn < alpha^2 * d2_2nn.  The comparison is exact (Fraction) so huge
    fixed-point integers never hit float truncation.

    A zero nearest distance is always a match; a single candidate with a
    positive distance never is (no second-nearest to compare against).
    """
    if not d2_row:
        raise ValueError("empty distance row")
    nn_index = min(range(len(d2_row)), key=lambda i: (d2_row[i], i))
    d2_nn = d2_row[nn_index]
    if d2_nn == 0:
        return True, nn_index
    if len(d2_row) == 1:
        return False, nn_index
    d2_2nn = min(d2_row[i] for i in range(len(d2_row)) if i != nn_index)
    bound = Fraction(alpha) ** 2 * Fraction(d2_2nn)
    return Fraction(d2_nn) < bound, nn_index


def ratio_match(x: FeatureVector, Y: Descriptor,
                alpha: float = 0.5) -> tuple[bool, int]:
    """Does x match descriptor Y under the distance-ratio criterion?"""
    row = [_dist_sq(x, y, Y.variant) for y in Y.vectors]
    return ratio_match_distances(row, alpha)


def similarity(X: Descriptor, Y: Descriptor, alpha: float = 0.5) -> int:
    """Count of X's vectors that pass the ratio test against Y."""
    if X.variant != Y.variant:
        raise DimMismatch("descriptors have different variants")
    return sum(1 for x in X.vectors if ratio_match(x, Y, alpha)[0])


def rank_top_k(scores: Sequence[tuple[str, int]], k: int) -> list[tuple[str, int]]:
    """Top-k by descending score, ties broken by ascending image id."""
    if k > len(scores):
        raise ValueError(f"k={k} exceeds {len(scores)} scored images")
    ordered = sorted(scores, key=lambda item: (-item[1], item[0]))
    return ordered[:k]


def toy_extract(image: GrayImage, grid: int, variant: str = REAL) -> Descriptor:
    """Stand-in extractor: one normalized 64-bin intensity histogram per
    grid x grid block.  The binary form thresholds each component at the
    vector's median."""
    if grid < 1:
        raise ValueError("grid must be >= 1")
    if grid > image.width or grid > image.height:
        raise ImageTooSmall(
            f"{grid}x{grid} grid on a {image.width}x{image.height} image"
        )
    vectors = []
    for by in range(grid):
        y0 = by * image.height // grid
        y1 = (by + 1) * image.height // grid
        for bx in range(grid):
            x0 = bx * image.width // grid
            x1 = (bx + 1) * image.width // grid
            hist = [0] * TOY_DIM
            for y in range(y0, y1):
                row = y * image.width
                for x in range(x0, x1):
                    hist[image.pixels[row + x] >> 2] += 1
            count = (y1 - y0) * (x1 - x0)
            values = tuple(h / count for h in hist)
            if variant == BINARY:
                med = statistics.median(values)
                values = tuple(1 if v > med else 0 for v in values)
            vectors.append(FeatureVector(values))
    return Descriptor(tuple(vectors), variant)


def save_descriptor(desc: Descriptor, path) -> None:
    """Text format: `variant dim count` header then one vector per line
    (space-separated decimals, or a contiguous 0/1 string for binary)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{desc.variant} {desc.dim} {len(desc)}\n")
        for v in desc.vectors:
            if desc.variant == BINARY:
                fh.write("".join(str(b) for b in v.values) + "\n")
            else:
                fh.write(" ".join(repr(float(c)) for c in v.values) + "\n")


def load_descriptor(path) -> Descriptor:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ParseError("line 1: expected `variant dim count`")
        variant = header[0]
        if variant not in (REAL, BINARY):
            raise ParseError(f"line 1: unknown variant {variant!r}")
        try:
            dim, count = int(header[1]), int(header[2])
        except ValueError as exc:
            raise ParseError(f"line 1: {exc}") from exc
        vectors = []
        for lineno in range(2, count + 2):
            line = fh.readline()
            if not line:
                raise ParseError(f"line {lineno}: missing vector")
            line = line.strip()
            if variant == BINARY:
                if len(line) != dim or set(line) - {"0", "1"}:
                    raise ParseError(f"line {lineno}: expected {dim} bits")
                values = tuple(int(ch) for ch in line)
            else:
                parts = line.split()
                if len(parts) != dim:
                    raise ParseError(
                        f"line {lineno}: expected {dim} values, got {len(parts)}"
                    )
                try:
                    values = tuple(float(p) for p in parts)
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: {exc}") from exc
            vectors.append(FeatureVector(values))
    return Descriptor(tuple(vectors), variant)
