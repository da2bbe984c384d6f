"""Continuous-time contact oracle over exact piecewise-linear trajectories.

Between two consecutive breakpoints of either trajectory the relative
position is linear in t, so squared distance is a quadratic and threshold
crossings are its roots.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from ..mobile import CLOSE_CONTACT_S, PROXIMITY_CONTACT_S
from ..radio import CLOSE_CONTACT_M
from .scenario import Path, Scenario

_EPS = 1e-9


@dataclass(frozen=True, order=True)
class GroundTruthContact:
    a: str
    b: str
    start: float
    end: float
    rule: str  # "close" (6 ft / 15 min) or "proximity" (in range / 60 min)

    @property
    def length(self) -> float:
        return self.end - self.start


def _segments(pa: Path, pb: Path, lo: float, hi: float):
    cuts = sorted({lo, hi, *(t for t in pa.breakpoints() + pb.breakpoints() if lo < t < hi)})
    for s, e in zip(cuts, cuts[1:]):
        ax0, ay0 = pa.at(s)
        bx0, by0 = pb.at(s)
        ax1, ay1 = pa.at(e)
        bx1, by1 = pb.at(e)
        r0 = (ax0 - bx0, ay0 - by0)
        r1 = (ax1 - bx1, ay1 - by1)
        yield s, e, r0, ((r1[0] - r0[0]) / (e - s), (r1[1] - r0[1]) / (e - s))


def within_intervals(pa: Path, pb: Path, radius: float, lo: float, hi: float) -> list[tuple[float, float]]:
    """Maximal sub-intervals of [lo, hi] where the distance between the two paths is <= radius."""
    pieces = []
    if hi < lo:
        return pieces
    if hi == lo:
        (ax, ay), (bx, by) = pa.at(lo), pb.at(lo)
        return [(lo, lo)] if math.hypot(ax - bx, ay - by) <= radius else []
    r2 = radius * radius
    for s, e, (rx, ry), (vx, vy) in _segments(pa, pb, lo, hi):
        a = vx * vx + vy * vy
        b = 2 * (rx * vx + ry * vy)
        c = rx * rx + ry * ry - r2
        span = e - s
        if a < 1e-18:
            if c <= 0:
                pieces.append((s, e))
            continue
        disc = b * b - 4 * a * c
        if disc < 0:
            continue
        root = math.sqrt(disc)
        t1 = (-b - root) / (2 * a)
        t2 = (-b + root) / (2 * a)
        t1, t2 = max(t1, 0.0), min(t2, span)
        if t1 <= t2:
            pieces.append((s + t1, s + t2))
    merged: list[list[float]] = []
    for s, e in pieces:
        if merged and s <= merged[-1][1] + _EPS:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [(s, e) for s, e in merged]


def min_distance(pa: Path, pb: Path, lo: float, hi: float) -> float:
    best = math.inf
    if hi <= lo:
        (ax, ay), (bx, by) = pa.at(lo), pb.at(lo)
        return math.hypot(ax - bx, ay - by)
    for s, e, (rx, ry), (vx, vy) in _segments(pa, pb, lo, hi):
        a = vx * vx + vy * vy
        tau = 0.0 if a < 1e-18 else min(max(-(rx * vx + ry * vy) / a, 0.0), e - s)
        best = min(best, math.hypot(rx + vx * tau, ry + vy * tau))
    return best


def ground_truth_contacts(scenario: Scenario, paths: dict[str, Path] | None = None) -> list[GroundTruthContact]:
    """Contact intervals for every agent pair, in absolute unix seconds, sorted."""
    paths = paths or scenario.paths()
    horizon = float(scenario.duration_s)
    contacts = []
    for a, b in itertools.combinations(sorted(paths), 2):
        pa, pb = paths[a], paths[b]
        for s, e in within_intervals(pa, pb, CLOSE_CONTACT_M, 0.0, horizon):
            if e - s >= CLOSE_CONTACT_S - _EPS:
                contacts.append(GroundTruthContact(a, b, scenario.start + s, scenario.start + e, "close"))
        for s, e in within_intervals(pa, pb, scenario.radio.max_range_m, 0.0, horizon):
            if e - s >= PROXIMITY_CONTACT_S - _EPS:
                contacts.append(GroundTruthContact(a, b, scenario.start + s, scenario.start + e, "proximity"))
    return sorted(contacts)
