"""The mobile unit: broadcast, suspect filtering over the temporary/final files, retention.

The state never holds a position. Distances arrive already estimated by the
radio layer, and everything stored is keyed by broadcast code.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from .ids import ASU, RSU, SSU, ReferenceCode, RotationSchedule, epoch_of, is_regular, rotation_schedule
from .radio import CLOSE_CONTACT_M, SignalObservation
from .records import DAY_SECONDS, ContactRecord, UploadPayload, utc_day

logger = logging.getLogger(__name__)

CLOSE_CONTACT_S = 15 * 60
PROXIMITY_CONTACT_S = 60 * 60
LOCAL_RETENTION_S = 21 * DAY_SECONDS
SELF_CHECK_WINDOW_S = 14 * DAY_SECONDS


class NotRegisteredError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConsentFlags:
    """Privacy dashboard switches. Everything is off until the user opts in."""

    store_contacts: bool = False
    broadcast_enabled: bool = False
    share_with_government: bool = False

    @classmethod
    def all_on(cls) -> ConsentFlags:
        return cls(True, True, True)


@dataclass
class TempEntry:
    code: ReferenceCode
    registered_time: int
    registered_distance: float


@dataclass(frozen=True)
class RiskAlertShown:
    timestamp: int


@dataclass(frozen=True)
class FileSentToSUDUN:
    timestamp: int
    record_count: int


@dataclass(frozen=True)
class FileUploadedDirect:
    timestamp: int
    record_count: int


@dataclass
class MobileState:
    uerc: ReferenceCode | None = None
    schedule: RotationSchedule | None = None
    consent: ConsentFlags = field(default_factory=ConsentFlags)
    temp_file: dict[ReferenceCode, TempEntry] = field(default_factory=dict)
    final_file: list[ContactRecord] = field(default_factory=list)
    pending_events: list = field(default_factory=list)
    # code -> UTC day of its newest final-file record; mirrors final_file
    _last_day: dict[ReferenceCode, int] = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def registered(cls, uerc: ReferenceCode, now: int, consent: ConsentFlags | None = None) -> MobileState:
        """State of a device that just received ``uerc`` from the registry at ``now``."""
        return cls(uerc=uerc, schedule=rotation_schedule(uerc, epoch_of(now)), consent=consent or ConsentFlags())

    def _own_code(self, now: int) -> ReferenceCode:
        if self.uerc is None or self.schedule is None:
            raise NotRegisteredError("device has no UERC yet")
        epoch = epoch_of(now)
        if not self.schedule.covers(epoch):
            # the device regenerates the next 14 days once the window runs out
            self.schedule = rotation_schedule(self.uerc, epoch)
        return self.schedule.code_at(epoch)

    def current_ruerc(self, now: int) -> ReferenceCode | None:
        code = self._own_code(now)
        return code if self.consent.broadcast_enabled else None

    def on_scan(self, scanned: Iterable[SignalObservation], now: int) -> list[UploadPayload]:
        """Run the suspect filter over one scan; returns any payloads handed to a SUDUN.

        A code missing from a scan loses its temporary entry, so a single
        missed scan restarts the streak.
        """
        own = self._own_code(now)
        previous = self.temp_file
        temp = self.temp_file = {}  # entries whose code is not re-seen here are dropped

        payloads = []
        for code, current, _ in scanned:
            if code == own or code == ASU:
                continue
            if code == RSU:
                self.pending_events.append(RiskAlertShown(now))
                continue
            if code == SSU:
                payload = self.send_to_sudun(now)
                if payload is not None:
                    payloads.append(payload)
                continue

            entry = temp.get(code)
            if entry is None:
                entry = previous.get(code)
                if entry is None:
                    temp[code] = TempEntry(code, now, current)
                    continue
                temp[code] = entry
            elapsed = now - entry.registered_time
            if current <= CLOSE_CONTACT_M and entry.registered_distance <= CLOSE_CONTACT_M:
                if elapsed >= CLOSE_CONTACT_S:
                    self._store_contact(code, current, now, elapsed)
                else:
                    entry.registered_distance = current
            elif elapsed >= PROXIMITY_CONTACT_S:
                self._store_contact(code, current, now, elapsed)
            else:
                entry.registered_distance = current
        return payloads

    def _store_contact(self, code: ReferenceCode, distance: float, now: int, duration: int) -> None:
        day = utc_day(now)
        if self._last_day.get(code) == day or not self.consent.store_contacts:
            return
        self.final_file.append(ContactRecord(code, distance, now, duration))
        self._last_day[code] = day

    def _reindex(self) -> None:
        self._last_day = {}
        for record in self.final_file:
            self._last_day[record.code] = max(self._last_day.get(record.code, -1), utc_day(record.timestamp))

    def purge_expired(self, now: int) -> int:
        """Drop final-file records older than 21 days; returns how many went."""
        cutoff = now - LOCAL_RETENTION_S
        kept = [r for r in self.final_file if r.timestamp >= cutoff]
        removed = len(self.final_file) - len(kept)
        if removed:
            self.final_file = kept
            self._reindex()
        return removed

    def self_check_payload(self, now: int) -> list[ContactRecord]:
        cutoff = now - SELF_CHECK_WINDOW_S
        return [r for r in self.final_file if r.timestamp >= cutoff]

    def _build_upload(self, now: int) -> UploadPayload | None:
        if self.uerc is None:
            raise NotRegisteredError("device has no UERC yet")
        if not self.consent.share_with_government:
            return None
        return UploadPayload(self.uerc, tuple(self.self_check_payload(now)))

    def send_to_sudun(self, now: int) -> UploadPayload | None:
        payload = self._build_upload(now)
        if payload is not None:
            self.pending_events.append(FileSentToSUDUN(now, len(payload.records)))
        return payload

    def upload_direct(self, now: int) -> UploadPayload | None:
        """Same consent gate as the SUDUN path, sent over the internet instead."""
        payload = self._build_upload(now)
        if payload is not None:
            self.pending_events.append(FileUploadedDirect(now, len(payload.records)))
        return payload

    def delete_all_local(self) -> None:
        self.temp_file.clear()
        self.final_file.clear()
        self._last_day.clear()

    def export_final_file(self) -> str:
        return "".join(r.to_line() + "\n" for r in self.final_file)


def assert_mobile_invariants(state: MobileState, now: int) -> None:
    """Check the state invariants; raises AssertionError on the first violation."""
    own = state._own_code(now)
    for code, entry in state.temp_file.items():
        assert is_regular(code) and code != own, f"illegal temp entry {code}"
        assert entry.registered_time <= now
    seen = set()
    for record in state.final_file:
        assert is_regular(record.code)
        key = (record.code, utc_day(record.timestamp))
        assert key not in seen, f"two records for {key}"
        seen.add(key)
