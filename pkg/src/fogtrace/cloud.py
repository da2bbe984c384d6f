"""Central registry.

Holds the tables of the cloud database (users, test results, affected,
suspected, organizations), the mirrored rotation index used to resolve
broadcast codes back to users, and the simulated SMS log. Fog nodes only
ever get a boolean back from it.
"""

from __future__ import annotations

import enum
import logging
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .ids import SCHEDULE_LENGTH, ReferenceCode, epoch_of, is_regular, issue_uerc, rotation_schedule
from .records import DAY_SECONDS, ContactRecord, UploadPayload
from .sudun import IngestionQueue

logger = logging.getLogger(__name__)

OTP_TTL_S = 300
SUSPECT_RETENTION_S = 30 * DAY_SECONDS
# how far back resolution must keep working: uploads cover 14 days, plus slack
INDEX_HISTORY_EPOCHS = 15 * 12

AGE_GROUPS = ("0-17", "18-29", "30-44", "45-59", "60+")


class RegistryError(Exception):
    pass


class UnknownUserError(RegistryError):
    pass


class UnknownOrganizationError(RegistryError):
    pass


class DuplicateResultError(RegistryError):
    pass


class RegistryUnavailable(RegistryError):
    pass


class OtpError(RegistryError):
    pass


class NoChallengeError(OtpError):
    pass


class OtpMismatchError(OtpError):
    pass


class OtpExpiredError(OtpError):
    pass


class OtpAlreadyUsedError(OtpError):
    pass


class Outcome(enum.Enum):
    POSITIVE = "POSITIVE"
    NEGATIVE = "NEGATIVE"


class SelfCheckStatus(enum.Enum):
    AT_RISK = "at_risk"
    CLEAR = "clear"


@dataclass(frozen=True)
class UserRecord:
    mobile_number: str
    uerc: ReferenceCode
    registered_at: int
    age_group: str | None = None
    postcode: str | None = None


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this

    result_id: str
    org_id: str
    timestamp: int
    outcome: Outcome
    mobile_number: str

    def to_line(self) -> str:
        return f"{self.result_id},{self.org_id},{self.timestamp},{self.outcome.value},{self.mobile_number}"

    @classmethod
    def from_line(cls, line: str) -> TestResult:
        parts = [p.strip() for p in line.strip().split(",")]
        if len(parts) != 5:
            raise ValueError(f"result line needs 5 fields, got {len(parts)}: {line!r}")
        result_id, org_id, ts, outcome, mobile = parts
        return cls(result_id, org_id, int(ts), Outcome(outcome.upper()), mobile)


@dataclass(frozen=True)
class AffectedRecord:
    affected_id: str
    uerc: ReferenceCode
    result_id: str


@dataclass(frozen=True)
class SuspectEntry:
    suspect_id: str
    suspected_uerc: ReferenceCode
    duration_s: int
    timestamp: int
    distance_m: float
    entered_at: int
    # not part of the minimal table; kept so the trace graph can draw case edges
    case_uerc: ReferenceCode
    upload_id: int | None = None


@dataclass(frozen=True)
class Organization:
    org_id: str
    name: str
    email: str = ""
    geo_location: tuple[float, float] | None = None
    address: str = ""
    arc_allowed: bool = False
    sudun_allowed: bool = False


@dataclass
class OtpChallenge:
    mobile_number: str
    otp: str
    issued_at: int
    used: bool = False


@dataclass(frozen=True)
class Notification:
    channel: str
    recipient: str
    timestamp: int
    message_class: str

    def to_line(self) -> str:
        return f"{self.channel},{self.recipient},{self.timestamp},{self.message_class}"


@dataclass
class IngestOutcome:
    upload_id: int | None
    uploader_infected: bool
    suspects: list[SuspectEntry] = field(default_factory=list)
    notifications: list[Notification] = field(default_factory=list)
    # (record index, suspect id) for every record that produced an entry
    resolutions: list[tuple[int, str]] = field(default_factory=list)
    unresolved: int = 0
    duplicates: int = 0
    self_check: SelfCheckStatus | None = None


@dataclass(frozen=True)
class DeletionReceipt:
    mobile_number: str
    uerc: ReferenceCode
    timestamp: int
    results_removed: int
    affected_removed: int
    suspects_removed: int


@dataclass
class _Pending:
    age_group: str | None
    postcode: str | None
    challenge: OtpChallenge


class Registry:
    def __init__(self, rng: random.Random | None = None):
        self.rng = rng if rng is not None else random.Random(0)
        self.users: dict[str, UserRecord] = {}
        self.organizations: dict[str, Organization] = {}
        self.results: dict[str, TestResult] = {}
        self.affected: dict[str, AffectedRecord] = {}
        self.suspects: dict[str, SuspectEntry] = {}
        self.notifications: list[Notification] = []
        self.queue = IngestionQueue()
        self.available = True
        self.counters: Counter[str] = Counter()

        self._pending: dict[str, _Pending] = {}
        self._by_uerc: dict[ReferenceCode, str] = {}
        self._infected_since: dict[ReferenceCode, int] = {}
        self._suspect_count: Counter[ReferenceCode] = Counter()
        self._suspect_keys: set[tuple[ReferenceCode, ReferenceCode, int]] = set()
        self._index: dict[tuple[int, ReferenceCode], ReferenceCode] = {}
        self._coverage: dict[ReferenceCode, tuple[int, int]] = {}
        self._next_affected = 1
        self._next_suspect = 1

    # -- organizations and registration ---------------------------------

    def add_organization(self, org: Organization) -> None:
        if org.org_id in self.organizations:
            raise RegistryError(f"organization {org.org_id!r} already exists")
        self.organizations[org.org_id] = org

    def _notify(self, recipient: str, now: int, message_class: str) -> Notification:
        note = Notification("SMS", recipient, now, message_class)
        self.notifications.append(note)
        return note

    def register(self, mobile_number: str, age_group: str | None = None, postcode: str | None = None,
                 now: int = 0) -> OtpChallenge:
        if not mobile_number or not mobile_number.strip():
            raise RegistryError("mobile number is mandatory")
        if age_group is not None and age_group not in AGE_GROUPS:
            raise RegistryError(f"unknown age group {age_group!r}; expected one of {AGE_GROUPS}")
        challenge = OtpChallenge(mobile_number, f"{self.rng.randrange(10**6):06d}", now)
        self._pending[mobile_number] = _Pending(age_group, postcode or None, challenge)
        self._notify(mobile_number, now, "otp")
        return challenge

    def verify_otp(self, mobile_number: str, otp: str, now: int) -> UserRecord:
        pending = self._pending.get(mobile_number)
        if pending is None:
            raise NoChallengeError(f"no OTP was issued to {mobile_number}")
        challenge = pending.challenge
        if challenge.used:
            raise OtpAlreadyUsedError("OTP already used")
        if now - challenge.issued_at > OTP_TTL_S:
            raise OtpExpiredError(f"OTP expired {now - challenge.issued_at - OTP_TTL_S}s ago")
        if otp != challenge.otp:
            raise OtpMismatchError("OTP does not match")
        challenge.used = True

        existing = self.users.get(mobile_number)
        if existing is not None:
            return existing
        uerc = issue_uerc(self.rng)
        while uerc in self._by_uerc:
            uerc = issue_uerc(self.rng)
        user = UserRecord(mobile_number, uerc, now, pending.age_group, pending.postcode)
        self.users[mobile_number] = user
        self._by_uerc[uerc] = mobile_number
        self._extend_index(uerc, epoch_of(now), SCHEDULE_LENGTH)
        return user

    # -- rotation mirror ------------------------------------------------

    def _extend_index(self, uerc: ReferenceCode, start: int, length: int) -> None:
        schedule = rotation_schedule(uerc, start, length)
        for epoch, code in schedule.items():
            self._index[(epoch, code)] = uerc
        first, _ = self._coverage.get(uerc, (start, start))
        self._coverage[uerc] = (first, schedule.end)

    def refresh_schedules(self, now: int) -> None:
        """Keep every user's mirror 14 days ahead of ``now`` and drop stale epochs."""
        horizon = epoch_of(now) + SCHEDULE_LENGTH
        for uerc, (first, end) in list(self._coverage.items()):
            if end < horizon:
                self._extend_index(uerc, end, horizon - end)
        floor = epoch_of(now) - INDEX_HISTORY_EPOCHS
        stale = [key for key in self._index if key[0] < floor]
        for key in stale:
            del self._index[key]
        for uerc, (first, end) in self._coverage.items():
            if first < floor:
                self._coverage[uerc] = (floor, end)

    def resolve_ruerc(self, code: ReferenceCode, epoch: int) -> UserRecord | None:
        uerc = self._index.get((epoch, code))
        if uerc is None:
            return None
        return self.users[self._by_uerc[uerc]]

    def schedule_coverage(self, uerc: ReferenceCode) -> tuple[int, int] | None:
        return self._coverage.get(uerc)

    # -- status ---------------------------------------------------------

    def is_infected(self, uerc: ReferenceCode, now: int) -> bool:
        since = self._infected_since.get(uerc)
        return since is not None and since <= now

    def is_suspected(self, uerc: ReferenceCode) -> bool:
        return self._suspect_count[uerc] > 0

    def _at_risk(self, user: UserRecord | None, now: int) -> bool:
        return user is not None and (self.is_infected(user.uerc, now) or self.is_suspected(user.uerc))

    def user_by_uerc(self, uerc: ReferenceCode) -> UserRecord | None:
        mobile = self._by_uerc.get(uerc)
        return None if mobile is None else self.users[mobile]

    # -- test results ---------------------------------------------------

    def ingest_result(self, result: TestResult, now: int) -> AffectedRecord | None:
        if result.org_id not in self.organizations:
            raise UnknownOrganizationError(result.org_id)
        user = self.users.get(result.mobile_number)
        if user is None:
            raise UnknownUserError(result.mobile_number)
        if result.result_id in self.results:
            raise DuplicateResultError(result.result_id)
        self.results[result.result_id] = result
        if result.outcome is not Outcome.POSITIVE:
            return None
        record = AffectedRecord(f"A{self._next_affected:06d}", user.uerc, result.result_id)
        self._next_affected += 1
        self.affected[record.affected_id] = record
        since = self._infected_since.get(user.uerc)
        self._infected_since[user.uerc] = result.timestamp if since is None else min(since, result.timestamp)
        return record

    # -- fog-facing queries ---------------------------------------------

    def risk_query(self, codes: Iterable[ReferenceCode], now: int) -> bool:
        """True if any code belongs to an infected or suspected user. Only the boolean leaves."""
        if not self.available:
            raise RegistryUnavailable("registry is not reachable")
        self.counters["risk_queries"] += 1
        epoch = epoch_of(now)
        for code in codes:
            for e in (epoch, epoch - 1):
                if self._at_risk(self.resolve_ruerc(code, e), now):
                    return True
        return False

    # -- uploads --------------------------------------------------------

    def process_queue(self, now: int) -> list[IngestOutcome]:
        outcomes = []
        for item in self.queue.drain():
            try:
                outcomes.append(self.ingest_contact_file(item.payload, now, upload_id=item.upload_id))
            except UnknownUserError as exc:
                self.counters["uploads_rejected"] += 1
                logger.warning("dropping upload %d: unknown uploader %s", item.upload_id, exc)
        return outcomes

    def ingest_contact_file(self, payload: UploadPayload, now: int, upload_id: int | None = None) -> IngestOutcome:
        """Map an infected user's contact file to suspects.

        Uploads from users who are not infected are self-checks; the uploader
        gets an SMS with the verdict and nothing is stored.
        """
        uploader = self.user_by_uerc(payload.uploader_uerc)
        if uploader is None:
            raise UnknownUserError(payload.uploader_uerc.hex)
        if not self.is_infected(uploader.uerc, now):
            status = self.self_check(payload.records, now)
            self.counters["self_checks"] += 1
            note = self._notify(uploader.mobile_number, now, f"self_check_{status.value}")
            return IngestOutcome(upload_id, False, notifications=[note], self_check=status)

        outcome = IngestOutcome(upload_id, True)
        for index, record in enumerate(payload.records):
            suspect = self.resolve_ruerc(record.code, epoch_of(record.timestamp))
            if suspect is None or suspect.uerc == uploader.uerc:
                outcome.unresolved += 1
                continue
            key = (uploader.uerc, suspect.uerc, record.timestamp)
            if key in self._suspect_keys:
                outcome.duplicates += 1
                continue
            entry = SuspectEntry(
                suspect_id=f"S{self._next_suspect:06d}",
                suspected_uerc=suspect.uerc,
                duration_s=record.duration_s,
                timestamp=record.timestamp,
                distance_m=record.distance_m,
                entered_at=now,
                case_uerc=uploader.uerc,
                upload_id=upload_id,
            )
            self._next_suspect += 1
            self.suspects[entry.suspect_id] = entry
            self._suspect_keys.add(key)
            self._suspect_count[suspect.uerc] += 1
            outcome.suspects.append(entry)
            outcome.resolutions.append((index, entry.suspect_id))
            outcome.notifications.append(self._notify(suspect.mobile_number, now, "precaution"))
        self.counters["unresolved_codes"] += outcome.unresolved
        self.counters["duplicate_records"] += outcome.duplicates
        return outcome

    def self_check(self, records: Iterable[ContactRecord], now: int) -> SelfCheckStatus:
        for record in records:
            if self._at_risk(self.resolve_ruerc(record.code, epoch_of(record.timestamp)), now):
                return SelfCheckStatus.AT_RISK
        return SelfCheckStatus.CLEAR

    # -- retention and deletion -----------------------------------------

    def _drop_suspect(self, entry: SuspectEntry) -> None:
        del self.suspects[entry.suspect_id]
        self._suspect_keys.discard((entry.case_uerc, entry.suspected_uerc, entry.timestamp))
        self._suspect_count[entry.suspected_uerc] -= 1
        if self._suspect_count[entry.suspected_uerc] <= 0:
            del self._suspect_count[entry.suspected_uerc]

    def purge_expired(self, now: int) -> int:
        cutoff = now - SUSPECT_RETENTION_S
        expired = [e for e in self.suspects.values() if e.entered_at < cutoff]
        for entry in expired:
            self._drop_suspect(entry)
        return len(expired)

    def delete_user(self, mobile_number: str, now: int) -> DeletionReceipt:
        user = self.users.pop(mobile_number, None)
        if user is None:
            raise UnknownUserError(mobile_number)
        uerc = user.uerc
        del self._by_uerc[uerc]
        self._pending.pop(mobile_number, None)
        self._infected_since.pop(uerc, None)
        self._coverage.pop(uerc, None)
        for key in [k for k, owner in self._index.items() if owner == uerc]:
            del self._index[key]

        result_ids = [rid for rid, r in self.results.items() if r.mobile_number == mobile_number]
        affected = [a for a in self.affected.values() if a.uerc == uerc or a.result_id in result_ids]
        for a in affected:
            del self.affected[a.affected_id]
        for rid in result_ids:
            del self.results[rid]
        suspects = [e for e in self.suspects.values() if uerc in (e.suspected_uerc, e.case_uerc)]
        for entry in suspects:
            self._drop_suspect(entry)
        return DeletionReceipt(mobile_number, uerc, now, len(result_ids), len(affected), len(suspects))

    # -- views ------------------------------------------------------------

    def audit(self) -> list[str]:
        """Referential-integrity problems; empty when the tables are consistent."""
        problems = []
        for a in self.affected.values():
            if a.result_id not in self.results:
                problems.append(f"affected {a.affected_id} -> missing result {a.result_id}")
            if a.uerc not in self._by_uerc:
                problems.append(f"affected {a.affected_id} -> unregistered uerc")
        for r in self.results.values():
            if r.org_id not in self.organizations:
                problems.append(f"result {r.result_id} -> missing org {r.org_id}")
            if r.mobile_number not in self.users:
                problems.append(f"result {r.result_id} -> missing user")
        for e in self.suspects.values():
            if e.suspected_uerc not in self._by_uerc:
                problems.append(f"suspect {e.suspect_id} -> unregistered suspected uerc")
            if e.case_uerc not in self._by_uerc:
                problems.append(f"suspect {e.suspect_id} -> unregistered case uerc")
            if e.entered_at < e.timestamp:
                problems.append(f"suspect {e.suspect_id} entered before its contact")
        for u in self.users.values():
            if not is_regular(u.uerc) or self._by_uerc.get(u.uerc) != u.mobile_number:
                problems.append(f"user {u.mobile_number} has a bad uerc mapping")
        return problems

    def snapshot(self) -> RegistrySnapshot:
        return RegistrySnapshot(
            users=tuple(sorted(self.users.values(), key=lambda u: u.uerc)),
            organizations=tuple(self.organizations[k] for k in sorted(self.organizations)),
            results=tuple(self.results[k] for k in sorted(self.results)),
            affected=tuple(self.affected[k] for k in sorted(self.affected)),
            suspects=tuple(self.suspects[k] for k in sorted(self.suspects)),
        )


@dataclass(frozen=True)
class RegistrySnapshot:
    users: tuple[UserRecord, ...] = ()
    organizations: tuple[Organization, ...] = ()
    results: tuple[TestResult, ...] = ()
    affected: tuple[AffectedRecord, ...] = ()
    suspects: tuple[SuspectEntry, ...] = ()

    def infected_uercs(self) -> set[ReferenceCode]:
        return {a.uerc for a in self.affected}

    def suspected_uercs(self) -> set[ReferenceCode]:
        return {e.suspected_uerc for e in self.suspects}

    def to_dict(self) -> dict:
        def plain(obj):
            row = asdict(obj)
            for key, value in row.items():
                if isinstance(value, ReferenceCode):
                    row[key] = value.hex
                elif isinstance(value, enum.Enum):
                    row[key] = value.value
                elif isinstance(value, tuple):
                    row[key] = list(value)
            return row

        return {
            "users": [plain(u) for u in self.users],
            "organizations": [plain(o) for o in self.organizations],
            "results": [plain(r) for r in self.results],
            "affected": [plain(a) for a in self.affected],
            "suspects": [plain(s) for s in self.suspects],
        }

    @classmethod
    def from_dict(cls, data: dict) -> RegistrySnapshot:
        code = ReferenceCode.from_hex
        try:
            return cls(
                users=tuple(
                    UserRecord(u["mobile_number"], code(u["uerc"]), int(u["registered_at"]),
                               u.get("age_group"), u.get("postcode"))
                    for u in data.get("users", [])
                ),
                organizations=tuple(
                    Organization(
                        o["org_id"], o.get("name", ""), o.get("email", ""),
                        tuple(o["geo_location"]) if o.get("geo_location") else None,
                        o.get("address", ""), bool(o.get("arc_allowed")), bool(o.get("sudun_allowed")),
                    )
                    for o in data.get("organizations", [])
                ),
                results=tuple(
                    TestResult(r["result_id"], r["org_id"], int(r["timestamp"]), Outcome(r["outcome"]),
                               r["mobile_number"])
                    for r in data.get("results", [])
                ),
                affected=tuple(
                    AffectedRecord(a["affected_id"], code(a["uerc"]), a["result_id"])
                    for a in data.get("affected", [])
                ),
                suspects=tuple(
                    SuspectEntry(
                        s["suspect_id"], code(s["suspected_uerc"]), int(s["duration_s"]), int(s["timestamp"]),
                        float(s["distance_m"]), int(s["entered_at"]), code(s["case_uerc"]), s.get("upload_id"),
                    )
                    for s in data.get("suspects", [])
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed registry snapshot: {exc}") from exc
