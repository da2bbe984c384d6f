"""Reference codes: UERC issuance, two-hour RUERC rotation and the reserved beacon codes.

A user's broadcast pseudonym for a given epoch is a single AES-128 block:
the key is the user's UERC and the plaintext is the epoch index encoded as
16 big-endian bytes. Device and registry run the same pure function, so the
registry can mirror any user's schedule from the stored UERC alone.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

EPOCH_SECONDS = 7200
EPOCHS_PER_DAY = 86400 // EPOCH_SECONDS
SCHEDULE_DAYS = 14
SCHEDULE_LENGTH = SCHEDULE_DAYS * EPOCHS_PER_DAY  # 168

_MASK_128 = (1 << 128) - 1
_HEX_DIGITS = frozenset("0123456789abcdefABCDEF")


class CodeKind(enum.Enum):
    REGULAR = "regular"
    ASU = "asu"  # ARC identity beacon
    RSU = "rsu"  # risk alert beacon
    SSU = "ssu"  # SUDUN upload trigger


class InvalidCodeError(ValueError):
    """Raised for malformed code text or a special code where a Regular one is required."""


class ReferenceCode(int):
    """Opaque 128-bit identifier.

    An ``int`` subclass so hashing and comparison stay cheap on the scan path;
    ordering therefore matches ordering of the hex text.
    """

    __slots__ = ()

    def __new__(cls, value: int):
        if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value <= _MASK_128:
            raise InvalidCodeError(f"code value out of 128-bit range: {value!r}")
        return super().__new__(cls, value)

    @classmethod
    def from_hex(cls, text: str) -> ReferenceCode:
        if len(text) != 32:
            raise InvalidCodeError(f"expected 32 hex characters, got {len(text)}")
        if not _HEX_DIGITS.issuperset(text):
            raise InvalidCodeError(f"not a hex string: {text!r}")
        return cls(int(text, 16))

    @classmethod
    def from_bytes(cls, raw: bytes) -> ReferenceCode:
        if len(raw) != 16:
            raise InvalidCodeError(f"expected 16 bytes, got {len(raw)}")
        return cls(int.from_bytes(raw, "big"))

    @property
    def value(self) -> int:
        return int(self)

    @property
    def hex(self) -> str:
        return f"{int(self):032x}"

    def to_bytes(self) -> bytes:
        return int(self).to_bytes(16, "big")

    @property
    def kind(self) -> CodeKind:
        return classify_code(self)

    def __str__(self) -> str:
        return self.hex

    def __repr__(self) -> str:
        return f"ReferenceCode({self.hex})"


ASU = ReferenceCode(0xA1)
RSU = ReferenceCode(0xA2)
SSU = ReferenceCode(0xA3)

_SPECIAL = {int(ASU): CodeKind.ASU, int(RSU): CodeKind.RSU, int(SSU): CodeKind.SSU}


def classify_code(code: ReferenceCode) -> CodeKind:
    return _SPECIAL.get(code, CodeKind.REGULAR)


def is_regular(code: ReferenceCode) -> bool:
    return code not in _SPECIAL


def _require_regular(code: ReferenceCode) -> None:
    if not is_regular(code):
        raise InvalidCodeError(f"{classify_code(code).name} code cannot be used as a user key")


def issue_uerc(rng: random.Random) -> ReferenceCode:
    """Draw a fresh Regular code from ``rng``, uniform over the non-reserved space."""
    while True:
        value = rng.getrandbits(128)
        if value not in _SPECIAL:
            return ReferenceCode(value)


def epoch_of(unix_seconds: int | float) -> int:
    if unix_seconds < 0:
        raise ValueError("unix_seconds must be non-negative")
    return int(unix_seconds // EPOCH_SECONDS)


def epoch_start(epoch: int) -> int:
    return epoch * EPOCH_SECONDS


def _encrypt_blocks(key: ReferenceCode, blocks: bytes) -> bytes:
    # ECB over concatenated blocks is the same as encrypting each block alone.
    encryptor = Cipher(algorithms.AES(key.to_bytes()), modes.ECB()).encryptor()
    return encryptor.update(blocks) + encryptor.finalize()


def _escape_reserved(key: ReferenceCode, block: bytes) -> ReferenceCode:
    code = ReferenceCode.from_bytes(block)
    if not is_regular(code):
        code = ReferenceCode.from_bytes(_encrypt_blocks(key, block))
    return code


def derive_ruerc(uerc: ReferenceCode, epoch: int) -> ReferenceCode:
    """Broadcast code of ``uerc`` during ``epoch``.

    An output that lands on a reserved value is encrypted once more, so the
    result is always Regular.
    """
    _require_regular(uerc)
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    block = _encrypt_blocks(uerc, epoch.to_bytes(16, "big"))
    return _escape_reserved(uerc, block)


@dataclass(frozen=True)
class RotationSchedule:
    owner_uerc: ReferenceCode
    start: int
    codes: tuple[ReferenceCode, ...] = field(repr=False)

    @property
    def end(self) -> int:
        """First epoch past the schedule."""
        return self.start + len(self.codes)

    def covers(self, epoch: int) -> bool:
        return self.start <= epoch < self.end

    def code_at(self, epoch: int) -> ReferenceCode | None:
        if not self.covers(epoch):
            return None
        return self.codes[epoch - self.start]

    def items(self):
        """Yield ``(epoch, code)`` pairs in epoch order."""
        for offset, code in enumerate(self.codes):
            yield self.start + offset, code


def rotation_schedule(uerc: ReferenceCode, start: int, length: int = SCHEDULE_LENGTH) -> RotationSchedule:
    _require_regular(uerc)
    if start < 0:
        raise ValueError("start epoch must be non-negative")
    plaintext = b"".join(e.to_bytes(16, "big") for e in range(start, start + length))
    ciphertext = _encrypt_blocks(uerc, plaintext)
    codes = tuple(_escape_reserved(uerc, ciphertext[i:i + 16]) for i in range(0, len(ciphertext), 16))
    return RotationSchedule(uerc, start, codes)
