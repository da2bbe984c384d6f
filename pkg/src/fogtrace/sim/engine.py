"""Deterministic tick loop wiring mobiles, fog nodes and the registry together."""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, field

from ..arc import ArcState
from ..cloud import Outcome, Registry, TestResult
from ..ids import SSU, ReferenceCode
from ..mobile import FileSentToSUDUN, FileUploadedDirect, MobileState, RiskAlertShown
from ..radio import SignalObservation, nearest_per_code, observe
from ..records import utc_day
from ..sudun import ForwardedUpload, PayloadValidationError, SudunNode, sudun_receive
from .ground_truth import GroundTruthContact, ground_truth_contacts, min_distance
from .scenario import Scenario, child_seed

logger = logging.getLogger(__name__)


@dataclass
class Report:
    detected_suspects: list[tuple[str, str]]
    ground_truth_contacts: list[GroundTruthContact]
    recall: float
    recall_close: float
    precision: float
    false_suspects: int
    suspects: list[dict]
    arc_alerts: list[dict]
    notifications: list[str]
    event_log: list[str]
    counters: dict[str, int]
    agents: dict[str, dict]
    registry: dict = field(repr=False, default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "detected_suspects": [list(p) for p in self.detected_suspects],
            "ground_truth_contacts": [
                {"a": c.a, "b": c.b, "start": c.start, "end": c.end, "rule": c.rule}
                for c in self.ground_truth_contacts
            ],
            "recall": self.recall,
            "recall_close": self.recall_close,
            "precision": self.precision,
            "false_suspects": self.false_suspects,
            "suspects": self.suspects,
            "arc_alerts": self.arc_alerts,
            "notifications": self.notifications,
            "event_log": self.event_log,
            "counters": self.counters,
            "agents": self.agents,
            "registry": self.registry,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _ratio(hit: int, total: int) -> float:
    return 1.0 if total == 0 else hit / total


class Simulation:
    """One run of a scenario. Keeps live component state around for inspection after ``run``."""

    def __init__(self, scenario: Scenario, keep_scan_log: bool = False):
        scenario.validate()
        self.scenario = scenario
        self.paths = scenario.paths()
        self.noise_rng = random.Random(child_seed(scenario.seed, "radio"))
        self.registry = Registry(random.Random(child_seed(scenario.seed, "registry")))
        for org in scenario.organizations:
            self.registry.add_organization(org)
        self.mobiles: dict[str, MobileState] = {}
        self.arcs = {cfg.node_id: ArcState(cfg) for cfg in sorted(scenario.arcs, key=lambda c: c.node_id)}
        self.suduns = {s.node_id: SudunNode(s.node_id, s.position)
                       for s in sorted(scenario.suduns, key=lambda s: s.node_id)}
        self.uploads: dict[int, ForwardedUpload] = {}
        self.events: list[str] = []
        self.counters: Counter[str] = Counter()
        self.agent_stats: dict[str, Counter] = {a.id: Counter() for a in scenario.agents}
        self.keep_scan_log = keep_scan_log
        self.scan_logs: dict[str, list[tuple[int, list[SignalObservation]]]] = {a.id: [] for a in scenario.agents}
        self._agents = {a.id: a for a in scenario.agents}
        self._agent_of_uerc: dict[ReferenceCode, str] = {}
        self._tests = sorted(enumerate(scenario.tests), key=lambda it: (it[1].time, it[0]))
        self._next_test = 0
        self._ran = False

    def _log(self, t: int, kind: str, *detail) -> None:
        self.events.append(" ".join([str(t), kind, *map(str, detail)]))

    # -- setup ------------------------------------------------------------

    def _register_agents(self, t: int) -> None:
        for agent_id in sorted(self._agents):
            agent = self._agents[agent_id]
            challenge = self.registry.register(agent.mobile_number, agent.age_group, agent.postcode, t)
            user = self.registry.verify_otp(agent.mobile_number, challenge.otp, t)
            self.mobiles[agent_id] = MobileState.registered(user.uerc, t, agent.consent)
            self._agent_of_uerc[user.uerc] = agent_id
            self._log(t, "register", agent_id, user.uerc.hex)

    # -- one tick -----------------------------------------------------------

    def _positions(self, t: int) -> dict[str, tuple[float, float]]:
        offset = t - self.scenario.start
        return {agent_id: self.paths[agent_id].at(offset) for agent_id in sorted(self.paths)}

    def _scan_agents(self, t, positions, broadcasters):
        radio = self.scenario.radio
        pending = []
        for agent_id, pos in positions.items():
            heard = []
            nearest_sudun = None
            for owner, code, where in broadcasters:
                if owner == agent_id:
                    continue
                obs = observe(pos, (code, where), radio, t, self.noise_rng)
                if obs is None:
                    continue
                heard.append(obs)
                if code == SSU and (nearest_sudun is None or obs.distance_m < nearest_sudun[1]):
                    nearest_sudun = (owner, obs.distance_m)
            scanned = nearest_per_code(heard)
            if self.keep_scan_log:
                self.scan_logs[agent_id].append((t, scanned))
            mobile = self.mobiles[agent_id]
            stored_before = len(mobile.final_file)
            payloads = mobile.on_scan(scanned, t)
            for record in mobile.final_file[stored_before:]:
                self.agent_stats[agent_id]["contacts"] += 1
                self._log(t, "contact", agent_id, record.code.hex, record.duration_s)
            for event in mobile.pending_events:
                if isinstance(event, RiskAlertShown):
                    self.agent_stats[agent_id]["risk_alerts"] += 1
                    self._log(t, "risk_alert", agent_id)
                elif isinstance(event, FileSentToSUDUN):
                    self.agent_stats[agent_id]["sudun_uploads"] += 1
                elif isinstance(event, FileUploadedDirect):
                    self.agent_stats[agent_id]["direct_uploads"] += 1
            mobile.pending_events.clear()
            for payload in payloads:
                pending.append((agent_id, nearest_sudun[0], payload))
        return pending

    def _scan_arcs(self, t, positions, agent_codes):
        radio = self.scenario.radio
        for node_id, arc in self.arcs.items():
            heard = []
            for agent_id, code in agent_codes:
                obs = observe(arc.config.position, (code, positions[agent_id]), radio, t, self.noise_rng)
                if obs is not None:
                    heard.append(obs)
            directive = arc.arc_scan(nearest_per_code(heard), self.registry.risk_query, t)
            if directive is not None:
                self.counters["arc_broadcasts"] += 1
                self._log(t, "arc_broadcast", node_id, directive.code.hex, directive.until)
            alert = arc.emergency_check(t)
            if alert is not None:
                self._log(t, "emergency_alert", node_id, alert.count)

    def _forward(self, t, pending) -> None:
        for agent_id, via, payload in pending:
            try:
                if via == "direct":
                    item = sudun_receive(payload, t, self.registry.queue, via="direct")
                else:
                    item = self.suduns[via].receive(payload, t, self.registry.queue)
            except PayloadValidationError:
                self.counters["uploads_rejected"] += 1
                continue
            self.uploads[item.upload_id] = item
            self.counters["uploads_forwarded"] += 1
            self._log(t, "upload", item.upload_id, agent_id, via, len(payload.records))

    def _process_queue(self, t: int) -> None:
        for outcome in self.registry.process_queue(t):
            if not outcome.uploader_infected:
                self._log(t, "self_check", outcome.upload_id, outcome.self_check.value)
                continue
            for index, suspect_id in outcome.resolutions:
                self._log(t, "resolve", outcome.upload_id, index, suspect_id)
            if outcome.unresolved:
                self._log(t, "unresolved", outcome.upload_id, outcome.unresolved)

    def _ingest_tests(self, t: int) -> list:
        direct = []
        sc = self.scenario
        while self._next_test < len(self._tests) and self._tests[self._next_test][1].time <= t - sc.start:
            _, spec = self._tests[self._next_test]
            self._next_test += 1
            result = TestResult(
                result_id=f"R{self._next_test:05d}",
                org_id=spec.org_id or sc.organizations[0].org_id,
                timestamp=sc.start + int(spec.time),
                outcome=spec.outcome,
                mobile_number=spec.mobile_number,
            )
            self.registry.ingest_result(result, t)
            agent_id = next(a.id for a in sc.agents if a.mobile_number == spec.mobile_number)
            self._log(t, "test_result", result.result_id, agent_id, result.outcome.value)
            if spec.outcome is Outcome.POSITIVE and self._agents[agent_id].upload == "direct":
                payload = self.mobiles[agent_id].upload_direct(t)
                self.mobiles[agent_id].pending_events.clear()
                if payload is not None:
                    self.agent_stats[agent_id]["direct_uploads"] += 1
                    direct.append((agent_id, "direct", payload))
        return direct

    def _day_rollover(self, t: int) -> None:
        for agent_id, mobile in self.mobiles.items():
            removed = mobile.purge_expired(t)
            if removed:
                self._log(t, "mobile_purge", agent_id, removed)
        purged = self.registry.purge_expired(t)
        if purged:
            self._log(t, "registry_purge", purged)
        self.registry.refresh_schedules(t)

    def tick(self, t: int, previous: int | None) -> None:
        positions = self._positions(t)
        agent_codes = []
        for agent_id in positions:
            code = self.mobiles[agent_id].current_ruerc(t)
            if code is not None:
                agent_codes.append((agent_id, code))
        broadcasters = [(agent_id, code, positions[agent_id]) for agent_id, code in agent_codes]
        for node_id, arc in self.arcs.items():
            broadcasters.extend((node_id, code, arc.config.position) for code in arc.advertised(t))
        for node_id, node in self.suduns.items():
            broadcasters.append((node_id, SSU, node.position))

        pending = self._scan_agents(t, positions, broadcasters)
        self._scan_arcs(t, positions, agent_codes)
        self._forward(t, pending)
        self._process_queue(t)
        self._forward(t, self._ingest_tests(t))
        if previous is not None and utc_day(t) != utc_day(previous):
            self._day_rollover(t)

    # -- driver -------------------------------------------------------------

    def run(self) -> Report:
        if self._ran:
            raise RuntimeError("a Simulation runs once; build a new one to rerun")
        self._ran = True
        times = self.scenario.scan_times()
        self._register_agents(times[0])
        previous = None
        for t in times:
            self.tick(t, previous)
            previous = t
        # uploads queued at the final tick
        self._process_queue(times[-1])
        return self._report()

    def _report(self) -> Report:
        sc = self.scenario
        agent_of = self._agent_of_uerc
        suspects = sorted(self.registry.suspects.values(), key=lambda e: e.suspect_id)
        detected = sorted({(agent_of[e.case_uerc], agent_of[e.suspected_uerc]) for e in suspects})
        truth = ground_truth_contacts(sc, self.paths)
        cases = {agent_of[a.uerc] for a in self.registry.affected.values()}

        def oriented(contacts):
            pairs = set()
            for c in contacts:
                if c.a in cases:
                    pairs.add((c.a, c.b))
                if c.b in cases:
                    pairs.add((c.b, c.a))
            return pairs

        relevant = oriented(truth)
        relevant_close = oriented(c for c in truth if c.rule == "close")
        all_pairs = {(c.a, c.b) for c in truth} | {(c.b, c.a) for c in truth}
        detected_set = set(detected)
        horizon = float(sc.duration_s)
        false_suspects = sum(
            1 for case, suspect in detected
            if min_distance(self.paths[case], self.paths[suspect], 0.0, horizon) > sc.radio.max_range_m
        )
        alerts = [
            {"node_id": a.node_id, "timestamp": a.timestamp, "count": a.count}
            for arc in self.arcs.values() for a in arc.alert_log
        ]
        counters = dict(self.counters)
        counters.update({f"registry_{k}": v for k, v in self.registry.counters.items()})
        counters["suspect_entries"] = len(suspects)
        agents = {
            agent_id: {
                "uerc": self.mobiles[agent_id].uerc.hex,
                "final_file": [r.to_line() for r in self.mobiles[agent_id].final_file],
                **{k: self.agent_stats[agent_id][k]
                   for k in ("contacts", "risk_alerts", "sudun_uploads", "direct_uploads")},
            }
            for agent_id in sorted(self.mobiles)
        }
        return Report(
            detected_suspects=detected,
            ground_truth_contacts=truth,
            recall=_ratio(len(relevant & detected_set), len(relevant)),
            recall_close=_ratio(len(relevant_close & detected_set), len(relevant_close)),
            precision=_ratio(len(detected_set & all_pairs), len(detected_set)),
            false_suspects=false_suspects,
            suspects=[
                {
                    "suspect_id": e.suspect_id,
                    "case": agent_of[e.case_uerc],
                    "suspect": agent_of[e.suspected_uerc],
                    "timestamp": e.timestamp,
                    "duration_s": e.duration_s,
                    "distance_m": round(e.distance_m, 3),
                    "entered_at": e.entered_at,
                    "upload_id": e.upload_id,
                }
                for e in suspects
            ],
            arc_alerts=alerts,
            notifications=[n.to_line() for n in self.registry.notifications],
            event_log=list(self.events),
            counters=dict(sorted(counters.items())),
            agents=agents,
            registry=self.registry.snapshot().to_dict(),
        )


def run(scenario: Scenario) -> Report:
    return Simulation(scenario).run()
