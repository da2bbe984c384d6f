"""Suspected User Data Uploader Node: validates consented uploads and forwards them unchanged."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, replace

from .ids import is_regular
from .mobile import SELF_CHECK_WINDOW_S
from .records import UploadPayload

logger = logging.getLogger(__name__)


class PayloadValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ForwardedUpload:
    upload_id: int
    payload: UploadPayload
    via: str  # SUDUN node id, or "direct"


class IngestionQueue:
    """FIFO handoff into the registry. Upload ids are assigned in arrival order."""

    def __init__(self):
        self._items: deque[ForwardedUpload] = deque()
        self._next_id = 1

    def put(self, payload: UploadPayload, via: str) -> ForwardedUpload:
        item = ForwardedUpload(self._next_id, payload, via)
        self._next_id += 1
        self._items.append(item)
        return item

    def drain(self) -> list[ForwardedUpload]:
        items = list(self._items)
        self._items.clear()
        return items

    def __len__(self):
        return len(self._items)


def validate_payload(payload: UploadPayload, now: int) -> None:
    if not is_regular(payload.uploader_uerc):
        raise PayloadValidationError("uploader code is a reserved beacon code")
    oldest = now - SELF_CHECK_WINDOW_S
    for i, record in enumerate(payload.records):
        if not is_regular(record.code):
            raise PayloadValidationError(f"record {i}: reserved beacon code {record.code.hex}")
        if not oldest <= record.timestamp <= now:
            raise PayloadValidationError(f"record {i}: timestamp {record.timestamp} outside the 14-day window")
        if not record.distance_m > 0 or record.duration_s < 0:
            raise PayloadValidationError(f"record {i}: bad distance or duration")


def sudun_receive(payload: UploadPayload, now: int, queue: IngestionQueue, via: str = "direct") -> ForwardedUpload:
    """Stamp ``payload`` with its arrival time and append it to ``queue``.

    Also serves the direct-to-cloud path, so both transports share one validation.
    """
    try:
        validate_payload(payload, now)
    except PayloadValidationError as exc:
        logger.warning("rejected upload via %s at %d: %s", via, now, exc)
        raise
    return queue.put(replace(payload, received_at=now), via)


@dataclass
class SudunNode:
    node_id: str
    position: tuple[float, float]

    def receive(self, payload: UploadPayload, now: int, queue: IngestionQueue) -> ForwardedUpload:
        # nothing is kept on the node
        return sudun_receive(payload, now, queue, via=self.node_id)

    @property
    def stored(self) -> tuple:
        return ()
