"""Fixed-point encoding of reals and signed/residue conversion.

Real descriptor components are mapped to signed integers by scaling with
2**scale_bits, then into the nonnegative residue domain of a Paillier
modulus.  Everything downstream (blinding, encrypted distances) works on
those residues; squared distances come back scaled by 2**(2*scale_bits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OutOfRange

DEFAULT_SCALE_BITS = 16
DEFAULT_RANGE_BITS = 24


@dataclass(frozen=True)
class FixedPointParams:
    """Binary scale and magnitude bound of the integer encoding.

    scale_bits: a real a maps to round(a * 2**scale_bits).
    range_bits: encoded integers stay below 2**range_bits in magnitude.
    """

    scale_bits: int = DEFAULT_SCALE_BITS
    range_bits: int = DEFAULT_RANGE_BITS

    def __post_init__(self):
        if self.scale_bits < 1:
            raise ValueError("scale_bits must be >= 1")
        if self.range_bits < self.scale_bits:
            raise ValueError("range_bits must be >= scale_bits")

    @property
    def scale(self) -> int:
        return 1 << self.scale_bits

    @property
    def max_real(self) -> float:
        """Strict upper bound on |a| for encodable reals."""
        return float(1 << (self.range_bits - self.scale_bits))


@dataclass(frozen=True)
class SignedResidue:
    """Nonnegative representative of a signed integer mod a Paillier n."""

    value: int
    modulus: int

    def __post_init__(self):
        if not 0 <= self.value < self.modulus:
            raise OutOfRange(f"residue {self.value} outside [0, {self.modulus})")


def encode_fixed(a: float, params: FixedPointParams) -> int:
    """Scale a real into the signed fixed-point integer domain.

    Rounds half away from zero so the map is symmetric around 0.
    """
    if not abs(a) < params.max_real:
        raise OutOfRange(f"|{a}| >= {params.max_real} is not encodable")
    t = math.floor(abs(a) * params.scale + 0.5)
    return -t if a < 0 else t


def decode_fixed(t: int, params: FixedPointParams) -> float:
    """Inverse scaling for encoded values."""
    return t / params.scale


def decode_distance_sq(d: int, params: FixedPointParams) -> float:
    """Squared distances of encoded vectors carry the scale twice."""
    return d / (params.scale * params.scale)


def to_residue(t: int, n: int) -> SignedResidue:
    """Map a signed integer with |t| <= n//2 to its residue mod n."""
    if abs(t) > n // 2:
        raise OutOfRange(f"|{t}| exceeds half the modulus")
    return SignedResidue(t % n, n)


def from_residue(r: SignedResidue) -> int:
    """Recover the signed integer; inverse of to_residue on its domain."""
    if r.value <= r.modulus // 2:
        return r.value
    return r.value - r.modulus


def assert_capacity(params: FixedPointParams, dim: int, n: int) -> None:
    """Check that a dim-dimensional squared distance cannot wrap mod n.

    The worst addend per dimension is (2 * 2**range_bits)**2; the sum over
    all dimensions must stay below n/2 so decoded distances are exact.
    """
    worst = dim * (2 << params.range_bits) ** 2
    if not worst < n // 2:
        raise OutOfRange(
            f"modulus too small: dim={dim}, range_bits={params.range_bits} "
            f"needs n > {2 * worst}"
        )
