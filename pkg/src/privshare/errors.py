"""Exception hierarchy shared across the package."""


class PrivShareError(Exception):
    """Base class for every error raised by this package."""


# ---- numeric / encoding ----

class OutOfRange(PrivShareError):
    """A value violates a declared magnitude bound."""


# ---- Paillier ----

class InvalidRandomizer(PrivShareError):
    """Encryption randomizer is not invertible modulo n."""


class MalformedCiphertext(PrivShareError):
    """Ciphertext is outside the valid group for this key."""


class KeyMismatch(PrivShareError):
    """Homomorphic operation over ciphertexts from different keys."""


# ---- descriptors ----

class DimMismatch(PrivShareError):
    """Vectors of different dimension were combined."""


class ImageTooSmall(PrivShareError):
    """Image cannot be split into the requested grid."""


class ParseError(PrivShareError):
    """A file or expression could not be parsed; message carries position."""


# ---- image separation ----

class InvalidRect(PrivShareError):
    """Privacy rectangle does not fit the image."""


class InvalidKernel(PrivShareError):
    """Blur kernel must be an odd integer >= 3."""


class RectMismatch(PrivShareError):
    """Secret part does not line up with the public image."""


class UnsupportedFormat(PrivShareError):
    """Image file is not 8-bit binary grayscale."""


# ---- search protocols ----

class ProtocolViolation(PrivShareError):
    """Decrypted protocol output breaks a protocol invariant."""


class VariantMismatch(PrivShareError):
    """Query variant differs from the stored search-bag variant."""


class NoMatchingRow(PrivShareError):
    """No gate row matches the presented wire key."""


class AuthFailure(PrivShareError):
    """Authenticated decryption of a gate payload failed."""


# ---- access control ----

class AccessDenied(PrivShareError):
    """Presented credentials do not satisfy the policy."""


class IntegrityFailure(PrivShareError):
    """Authenticated payload failed its integrity check."""


# ---- oblivious transfer ----

class InvalidChoice(PrivShareError):
    """Chosen index set is not a subset of the padded set."""


class MalformedRequest(PrivShareError):
    """Transfer request element is not in the expected subgroup."""


# ---- cloud storage / wire ----

class Conflict(PrivShareError):
    """Upload collides with different existing content."""


class MalformedRecord(PrivShareError):
    """Image record is missing required bags or has a bad id."""


class NotFound(PrivShareError):
    """Requested owner, image, or index does not exist."""


class ExistingKeys(PrivShareError):
    """Key material already exists for this owner."""


class RemoteError(PrivShareError):
    """Server-side error relayed over the wire protocol."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
