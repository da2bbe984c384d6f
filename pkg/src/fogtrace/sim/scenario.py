"""Scenario description: agents and their trajectories, fog nodes, organizations, test schedule."""

from __future__ import annotations

import bisect
import hashlib
import math
import random
from dataclasses import dataclass, field

from ..arc import ArcConfig
from ..cloud import AGE_GROUPS, Organization, Outcome
from ..ids import EPOCH_SECONDS
from ..mobile import ConsentFlags
from ..radio import DEFAULT_RADIO, RadioParams

# 2020-09-13 14:00:00 UTC, aligned to a rotation epoch
DEFAULT_START = 222223 * EPOCH_SECONDS


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.message = message
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


def child_seed(seed: int, label: str) -> int:
    """Stable per-component seed, independent of iteration order."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class Path:
    """Piecewise-linear trajectory; times are seconds from scenario start."""

    waypoints: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if not self.waypoints:
            raise ScenarioError("trajectory needs at least one waypoint")
        for t, x, y in self.waypoints:
            if not all(math.isfinite(v) for v in (t, x, y)):
                raise ScenarioError("waypoints must be finite")
        times = [w[0] for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScenarioError("waypoint times must be strictly increasing")
        object.__setattr__(self, "_times", times)

    @classmethod
    def stationary(cls, x: float, y: float) -> Path:
        return cls(((0.0, float(x), float(y)),))

    def at(self, t: float) -> tuple[float, float]:
        wps = self.waypoints
        i = bisect.bisect_right(self._times, t)
        if i == 0:
            return wps[0][1], wps[0][2]
        if i == len(wps):
            return wps[-1][1], wps[-1][2]
        t0, x0, y0 = wps[i - 1]
        t1, x1, y1 = wps[i]
        f = (t - t0) / (t1 - t0)
        return x0 + f * (x1 - x0), y0 + f * (y1 - y0)

    def breakpoints(self) -> list[float]:
        return list(self._times)


@dataclass(frozen=True)
class RandomWalk:
    """Seeded walk in a box; each leg moves ``speed * step_s`` in a random heading, or pauses."""

    x0: float
    y0: float
    speed: float = 1.0
    step_s: float = 60.0
    width: float = 50.0
    height: float = 50.0
    pause: float = 0.0

    def to_path(self, duration_s: float, seed: int) -> Path:
        if self.step_s <= 0 or self.speed < 0 or self.width <= 0 or self.height <= 0:
            raise ScenarioError("random walk needs step_s > 0, speed >= 0 and a positive box")
        rng = random.Random(seed)
        x, y, t = float(self.x0), float(self.y0), 0.0
        points = [(t, x, y)]
        while t < duration_s:
            t += self.step_s
            if rng.random() >= self.pause:
                heading = rng.uniform(0.0, 2 * math.pi)
                x = min(max(x + self.speed * self.step_s * math.cos(heading), 0.0), self.width)
                y = min(max(y + self.speed * self.step_s * math.sin(heading), 0.0), self.height)
            points.append((t, x, y))
        return Path(tuple(points))


@dataclass
class AgentSpec:
    id: str
    mobile_number: str
    trajectory: Path | RandomWalk
    consent: ConsentFlags = field(default_factory=ConsentFlags.all_on)
    age_group: str | None = None
    postcode: str | None = None
    upload: str = "sudun"  # or "direct": upload straight to the cloud once tested positive


@dataclass(frozen=True)
class SudunSpec:
    node_id: str
    position: tuple[float, float]


@dataclass(frozen=True)
class TestSpec:
    __test__ = False

    time: float  # seconds from scenario start
    mobile_number: str
    outcome: Outcome
    org_id: str | None = None


@dataclass
class Scenario:
    seed: int = 0
    start: int = DEFAULT_START
    duration_s: int = 7200
    scan_interval_s: int = 180
    radio: RadioParams = DEFAULT_RADIO
    agents: list[AgentSpec] = field(default_factory=list)
    arcs: list[ArcConfig] = field(default_factory=list)
    suduns: list[SudunSpec] = field(default_factory=list)
    organizations: list[Organization] = field(default_factory=list)
    tests: list[TestSpec] = field(default_factory=list)
    super_spreader_k: int = 10

    def validate(self) -> None:
        if self.start < 0:
            raise ScenarioError("start must be non-negative")
        if self.duration_s < 0:
            raise ScenarioError("duration must be non-negative")
        if self.scan_interval_s <= 0:
            raise ScenarioError("scan_interval must be positive")
        if self.super_spreader_k < 1:
            raise ScenarioError("super_spreader_k must be >= 1")
        ids, mobiles = set(), set()
        for agent in self.agents:
            if agent.id in ids:
                raise ScenarioError(f"duplicate agent id {agent.id!r}")
            if not agent.mobile_number:
                raise ScenarioError(f"agent {agent.id!r} has no mobile number")
            if agent.mobile_number in mobiles:
                raise ScenarioError(f"duplicate mobile number {agent.mobile_number!r}")
            if agent.age_group is not None and agent.age_group not in AGE_GROUPS:
                raise ScenarioError(f"agent {agent.id!r}: unknown age group {agent.age_group!r}")
            if agent.upload not in ("sudun", "direct"):
                raise ScenarioError(f"agent {agent.id!r}: upload must be 'sudun' or 'direct'")
            ids.add(agent.id)
            mobiles.add(agent.mobile_number)
        node_ids = [a.node_id for a in self.arcs] + [s.node_id for s in self.suduns]
        if len(set(node_ids)) != len(node_ids):
            raise ScenarioError("fog node ids must be unique")
        for node_pos in [a.position for a in self.arcs] + [s.position for s in self.suduns]:
            if not all(math.isfinite(v) for v in node_pos):
                raise ScenarioError("fog node positions must be finite")
        org_ids = {o.org_id for o in self.organizations}
        if len(org_ids) != len(self.organizations):
            raise ScenarioError("organization ids must be unique")
        for test in self.tests:
            if test.mobile_number not in mobiles:
                raise ScenarioError(f"test for unknown mobile {test.mobile_number!r}")
            if test.time < 0:
                raise ScenarioError("test times must be non-negative")
            if test.org_id is None and not self.organizations:
                raise ScenarioError("tests need at least one organization")
            if test.org_id is not None and test.org_id not in org_ids:
                raise ScenarioError(f"test references unknown organization {test.org_id!r}")

    def paths(self) -> dict[str, Path]:
        """Resolved trajectories; random walks get a child seed from (seed, agent id)."""
        resolved = {}
        for agent in self.agents:
            traj = agent.trajectory
            if isinstance(traj, RandomWalk):
                traj = traj.to_path(self.duration_s, child_seed(self.seed, f"walk:{agent.id}"))
            resolved[agent.id] = traj
        return resolved

    def scan_times(self) -> list[int]:
        return [self.start + k * self.scan_interval_s for k in range(self.duration_s // self.scan_interval_s + 1)]
