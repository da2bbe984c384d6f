"""Contact records and upload payloads shared by the mobile, SUDUN and registry sides."""

from __future__ import annotations

from dataclasses import dataclass

from .ids import ReferenceCode

DAY_SECONDS = 86400


def utc_day(unix_seconds: int | float) -> int:
    return int(unix_seconds // DAY_SECONDS)


@dataclass(frozen=True)
class ContactRecord:
    code: ReferenceCode
    distance_m: float
    timestamp: int
    duration_s: int

    def to_line(self) -> str:
        return f"{self.code.hex},{self.distance_m:.3f},{self.timestamp},{self.duration_s}"

    @classmethod
    def from_line(cls, line: str) -> ContactRecord:
        parts = line.strip().split(",")
        if len(parts) != 4:
            raise ValueError(f"expected 4 comma-separated fields, got {len(parts)}: {line!r}")
        code_hex, distance, ts, duration = parts
        return cls(ReferenceCode.from_hex(code_hex), float(distance), int(ts), int(duration))


@dataclass(frozen=True)
class UploadPayload:
    uploader_uerc: ReferenceCode
    records: tuple[ContactRecord, ...]
    received_at: int | None = None

    def to_text(self) -> str:
        lines = [f"uploader:{self.uploader_uerc.hex}"]
        lines.extend(r.to_line() for r in self.records)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> UploadPayload:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("uploader:"):
            raise ValueError("payload must start with an 'uploader:<code_hex>' header")
        uploader = ReferenceCode.from_hex(lines[0][len("uploader:"):].strip())
        return cls(uploader, tuple(ContactRecord.from_line(ln) for ln in lines[1:]))
