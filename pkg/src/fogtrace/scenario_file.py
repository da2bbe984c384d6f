"""Reader for the ``.scn`` scenario text format.

Sections are introduced by ``[name]`` or ``[kind id]`` headers; the body is
``key = value`` lines, except ``[tests]`` whose body lines are
``<seconds> <mobile> <positive|negative> [org_id]``. ``#`` starts a comment.
Every error carries the line it came from. See README for the full grammar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .arc import ArcConfig
from .cloud import Organization, Outcome
from .mobile import ConsentFlags
from .radio import RadioParams
from .sim.scenario import AgentSpec, Path, RandomWalk, Scenario, ScenarioError, SudunSpec, TestSpec

_SINGLE = {"scenario", "radio", "tests"}
_KEYED = {"org", "agent", "arc", "sudun"}
_ALLOWED = {
    "scenario": {"seed", "start", "duration", "scan_interval", "super_spreader_k"},
    "radio": {"n", "c", "max_range", "noise_sigma"},
    "org": {"name", "email", "location", "address", "arc", "sudun"},
    "agent": {"mobile", "consent", "age_group", "postcode", "upload", "waypoints", "walk", "position"},
    "arc": {"position", "min_present", "alert_delay", "hourly_threshold", "alert_duration", "org"},
    "sudun": {"position"},
}


@dataclass
class _Section:
    kind: str
    name: str | None
    line: int
    values: dict[str, tuple[str, int]] = field(default_factory=dict)
    rows: list[tuple[str, int]] = field(default_factory=list)

    def get(self, key, convert=str, default=None, required=False):
        if key not in self.values:
            if required:
                raise ScenarioError(f"[{self.kind}{' ' + self.name if self.name else ''}] missing '{key}'", self.line)
            return default
        raw, line = self.values[key]
        try:
            return convert(raw)
        except (ValueError, ScenarioError) as exc:
            detail = exc.message if isinstance(exc, ScenarioError) else exc
            raise ScenarioError(f"bad value for '{key}': {detail}", line) from None


def _split_sections(text: str) -> list[_Section]:
    sections: list[_Section] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError("unterminated section header", lineno)
            parts = line[1:-1].split()
            if not parts:
                raise ScenarioError("empty section header", lineno)
            kind = parts[0].lower()
            if kind in _SINGLE and len(parts) == 1:
                if any(s.kind == kind for s in sections):
                    raise ScenarioError(f"section [{kind}] appears twice", lineno)
                current = _Section(kind, None, lineno)
            elif kind in _KEYED and len(parts) == 2:
                current = _Section(kind, parts[1], lineno)
            else:
                raise ScenarioError(f"unknown section header [{line[1:-1]}]", lineno)
            sections.append(current)
            continue
        if current is None:
            raise ScenarioError("content before the first section header", lineno)
        if current.kind == "tests":
            current.rows.append((line, lineno))
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if key not in _ALLOWED[current.kind]:
            raise ScenarioError(f"unknown key '{key}' in [{current.kind}]", lineno)
        if key in current.values:
            raise ScenarioError(f"duplicate key '{key}'", lineno)
        current.values[key] = (value, lineno)
    return sections


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _point(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 'x,y', got {text!r}")
    return _float(parts[0]), _float(parts[1])


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _consent(text: str) -> ConsentFlags:
    words = {w.strip().lower() for w in text.split(",") if w.strip()}
    if words == {"all"}:
        return ConsentFlags.all_on()
    if words <= {"none"}:
        return ConsentFlags()
    unknown = words - {"store", "broadcast", "share"}
    if unknown:
        raise ValueError(f"unknown consent flag(s): {', '.join(sorted(unknown))}")
    return ConsentFlags("store" in words, "broadcast" in words, "share" in words)


def _waypoints(text: str) -> Path:
    points = []
    for token in text.split():
        if ":" not in token:
            raise ValueError(f"waypoint {token!r} is not 't:x,y'")
        t, xy = token.split(":", 1)
        points.append((_float(t), *_point(xy)))
    return Path(tuple(points))


def _walk(text: str) -> RandomWalk:
    opts = {}
    for token in text.split():
        if "=" not in token:
            raise ValueError(f"walk option {token!r} is not key=value")
        k, v = token.split("=", 1)
        opts[k] = v
    unknown = set(opts) - {"start", "speed", "step", "box", "pause"}
    if unknown:
        raise ValueError(f"unknown walk option(s): {', '.join(sorted(unknown))}")
    if "start" not in opts:
        raise ValueError("walk needs start=x,y")
    x0, y0 = _point(opts["start"])
    width, height = 50.0, 50.0
    if "box" in opts:
        w, _, h = opts["box"].partition("x")
        width, height = _float(w), _float(h)
    return RandomWalk(x0, y0, _float(opts.get("speed", "1")), _float(opts.get("step", "60")),
                      width, height, _float(opts.get("pause", "0")))


def parse_scenario(text: str) -> Scenario:
    sections = _split_sections(text)
    scenario = Scenario()
    for sec in sections:
        if sec.kind == "scenario":
            scenario.seed = sec.get("seed", int, scenario.seed)
            scenario.start = sec.get("start", int, scenario.start)
            scenario.duration_s = sec.get("duration", int, scenario.duration_s)
            scenario.scan_interval_s = sec.get("scan_interval", int, scenario.scan_interval_s)
            scenario.super_spreader_k = sec.get("super_spreader_k", int, scenario.super_spreader_k)
        elif sec.kind == "radio":
            try:
                scenario.radio = RadioParams(
                    n=sec.get("n", _float, 2.0),
                    C=sec.get("c", _float, -40.0),
                    max_range_m=sec.get("max_range", _float, 30.0),
                    noise_sigma_db=sec.get("noise_sigma", _float, 0.0),
                )
            except ValueError as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise ScenarioError(str(exc), sec.line) from None
        elif sec.kind == "org":
            scenario.organizations.append(Organization(
                org_id=sec.name,
                name=sec.get("name", str, sec.name),
                email=sec.get("email", str, ""),
                geo_location=sec.get("location", _point),
                address=sec.get("address", str, ""),
                arc_allowed=sec.get("arc", _bool, False),
                sudun_allowed=sec.get("sudun", _bool, False),
            ))
        elif sec.kind == "agent":
            given = [k for k in ("waypoints", "walk", "position") if k in sec.values]
            if len(given) != 1:
                raise ScenarioError(f"[agent {sec.name}] needs exactly one of waypoints, walk, position", sec.line)
            if given[0] == "waypoints":
                trajectory = sec.get("waypoints", _waypoints)
            elif given[0] == "walk":
                trajectory = sec.get("walk", _walk)
            else:
                trajectory = Path.stationary(*sec.get("position", _point))
            scenario.agents.append(AgentSpec(
                id=sec.name,
                mobile_number=sec.get("mobile", str, required=True),
                trajectory=trajectory,
                consent=sec.get("consent", _consent, ConsentFlags.all_on()),
                age_group=sec.get("age_group"),
                postcode=sec.get("postcode"),
                upload=sec.get("upload", str, "sudun"),
            ))
        elif sec.kind == "arc":
            try:
                scenario.arcs.append(ArcConfig(
                    node_id=sec.name,
                    position=sec.get("position", _point, required=True),
                    min_present=sec.get("min_present", int, 5),
                    alert_delay_s=sec.get("alert_delay", int, 300),
                    hourly_threshold=sec.get("hourly_threshold", int, 10),
                    alert_duration_s=sec.get("alert_duration", int, 600),
                    org_id=sec.get("org"),
                ))
            except ValueError as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise ScenarioError(str(exc), sec.line) from None
        elif sec.kind == "sudun":
            scenario.suduns.append(SudunSpec(sec.name, sec.get("position", _point, required=True)))
        elif sec.kind == "tests":
            for row, lineno in sec.rows:
                parts = row.split()
                if len(parts) not in (3, 4):
                    raise ScenarioError("test line must be '<seconds> <mobile> <positive|negative> [org]'", lineno)
                try:
                    when = _float(parts[0])
                    outcome = Outcome(parts[2].upper())
                except ValueError:
                    raise ScenarioError(f"bad test line {row!r}", lineno) from None
                scenario.tests.append(TestSpec(when, parts[1], outcome, parts[3] if len(parts) == 4 else None))

    lines = {("agent", s.name): s.line for s in sections if s.kind == "agent"}
    try:
        scenario.validate()
    except ScenarioError as exc:
        if exc.line is not None:
            raise
        # point at the most relevant header we can find
        line = next((ln for (_, name), ln in lines.items() if name and f"'{name}'" in str(exc)), None)
        raise ScenarioError(exc.message, line) from None
    return scenario


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
