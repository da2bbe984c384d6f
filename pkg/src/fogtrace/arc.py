"""Automatic Risk Checker fog node.

Each scan asks the registry, one code at a time, whether a nearby code
belongs to an infected or suspected user. The registry answers with a bare
boolean. An alert goes out only after ``alert_delay_s`` of continuous
positive answers and only when at least ``min_present`` devices are in range,
and the only thing ever broadcast is the RSU constant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .cloud import RegistryUnavailable
from .ids import ASU, RSU, ReferenceCode, is_regular
from .radio import SignalObservation

logger = logging.getLogger(__name__)

HOUR_S = 3600

RiskQuery = Callable[[set, int], bool]


@dataclass(frozen=True)
class ArcConfig:
    node_id: str
    position: tuple[float, float] = (0.0, 0.0)
    min_present: int = 5
    alert_delay_s: int = 300
    hourly_threshold: int = 10
    alert_duration_s: int = 600
    org_id: str | None = None

    def __post_init__(self):
        if self.min_present < 1:
            raise ValueError("min_present must be >= 1")
        if self.alert_delay_s < 0 or self.alert_duration_s < 0:
            raise ValueError("delays must be >= 0")
        if self.hourly_threshold < 0:
            raise ValueError("hourly_threshold must be >= 0")


@dataclass(frozen=True)
class BroadcastDirective:
    node_id: str
    code: ReferenceCode
    until: int


@dataclass(frozen=True)
class EmergencyAlert:
    node_id: str
    timestamp: int
    count: int
    recipients: tuple[str, ...]


@dataclass
class ArcState:
    config: ArcConfig
    pending_since: int | None = None
    broadcasting_until: int | None = None
    hourly_hits: list[tuple[int, int]] = field(default_factory=list)
    alert_log: list[EmergencyAlert] = field(default_factory=list)
    # risky codes seen within the trailing hour, pruned on every scan
    _recent_risky: list[tuple[int, frozenset]] = field(default_factory=list, repr=False)

    def is_broadcasting(self, now: int) -> bool:
        return self.broadcasting_until is not None and now < self.broadcasting_until

    def advertised(self, now: int) -> list[ReferenceCode]:
        return [ASU, RSU] if self.is_broadcasting(now) else [ASU]

    def _prune(self, now: int) -> None:
        floor = now - HOUR_S
        self._recent_risky = [(t, codes) for t, codes in self._recent_risky if t > floor]
        self.hourly_hits = [(t, n) for t, n in self.hourly_hits if t > floor]

    def arc_scan(self, scanned: Iterable[SignalObservation], risk_query: RiskQuery,
                 now: int) -> BroadcastDirective | None:
        codes = sorted({obs.code for obs in scanned if is_regular(obs.code)})
        try:
            risky = frozenset(c for c in codes if risk_query({c}, now))
        except RegistryUnavailable:
            logger.warning("ARC %s: registry unavailable at %d, state unchanged", self.config.node_id, now)
            return None

        self._prune(now)
        if risky:
            self._recent_risky.append((now, risky))
            self.hourly_hits.append((now, len(risky)))
        else:
            self.pending_since = None
            return None

        if self.pending_since is None:
            self.pending_since = now
        cfg = self.config
        if now - self.pending_since >= cfg.alert_delay_s and len(codes) >= cfg.min_present:
            self.broadcasting_until = now + cfg.alert_duration_s
            return BroadcastDirective(cfg.node_id, RSU, self.broadcasting_until)
        return None

    def risky_count(self, now: int) -> int:
        floor = now - HOUR_S
        seen: set = set()
        for t, codes in self._recent_risky:
            if t > floor:
                seen |= codes
        return len(seen)

    def emergency_check(self, now: int) -> EmergencyAlert | None:
        count = self.risky_count(now)
        if count <= self.config.hourly_threshold:
            return None
        if self.alert_log and now - self.alert_log[-1].timestamp < HOUR_S:
            return None
        recipients = ("organization-authority", "health-authority")
        if self.config.org_id:
            recipients = (f"org:{self.config.org_id}",) + recipients
        alert = EmergencyAlert(self.config.node_id, now, count, recipients)
        self.alert_log.append(alert)
        return alert
