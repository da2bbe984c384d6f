"""Privacy-preserving mobile/fog contact tracing: protocol pieces and a deterministic simulator."""

from .ids import ASU, RSU, SSU, CodeKind, ReferenceCode, classify_code, derive_ruerc, epoch_of, issue_uerc, rotation_schedule

__version__ = "0.1.0"

__all__ = [
    "ASU", "RSU", "SSU", "CodeKind", "ReferenceCode", "classify_code", "derive_ruerc", "epoch_of",
    "issue_uerc", "rotation_schedule",
]
