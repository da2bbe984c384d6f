"""Contact-tracing graph over registry snapshots, super-spreader flags and cluster tables."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import networkx as nx

from .cloud import Outcome, RegistrySnapshot
from .ids import ReferenceCode

DEFAULT_SUPER_SPREADER_K = 10
UNKNOWN = "unknown"

# node keys are (type, id) tuples
CENTER, USER, RESULT = "center", "user", "result"
TESTED, RESULT_OF, EXPOSED = "tested", "result_of", "exposed"


@dataclass
class TraceGraph:
    graph: nx.MultiDiGraph

    def nodes_of(self, kind: str) -> list[tuple[str, str]]:
        return sorted(n for n in self.graph.nodes if n[0] == kind)

    def edges_of(self, kind: str) -> list[tuple]:
        return sorted((u, v) for u, v, k in self.graph.edges(keys=True) if k == kind)

    def case_edges(self) -> list[tuple]:
        """Result -> User edges of positive results."""
        return sorted(
            (u, v) for u, v, k, data in self.graph.edges(keys=True, data=True)
            if k == RESULT_OF and data.get("positive")
        )

    def exposure_degree(self, user: tuple[str, str]) -> int:
        return sum(1 for _, _, k in self.graph.out_edges(user, keys=True) if k == EXPOSED)

    def to_edge_list(self) -> str:
        lines = [f"{u[0]}:{u[1]} -> {v[0]}:{v[1]}" for u, v, _ in self.graph.edges(keys=True)]
        return "".join(line + "\n" for line in sorted(lines))


def build_graph(snapshot: RegistrySnapshot) -> TraceGraph:
    g = nx.MultiDiGraph()
    user_by_mobile = {u.mobile_number: u for u in snapshot.users}
    for org in snapshot.organizations:
        g.add_node((CENTER, org.org_id), name=org.name)
    for user in snapshot.users:
        g.add_node((USER, user.uerc.hex), postcode=user.postcode, age_group=user.age_group)
    for result in snapshot.results:
        node = (RESULT, result.result_id)
        g.add_node(node, outcome=result.outcome.value)
        g.add_edge((CENTER, result.org_id), node, key=TESTED)
        user = user_by_mobile.get(result.mobile_number)
        if user is not None:
            g.add_edge(node, (USER, user.uerc.hex), key=RESULT_OF,
                       positive=result.outcome is Outcome.POSITIVE)
    pairs = {(e.case_uerc, e.suspected_uerc) for e in snapshot.suspects}
    for case, suspect in sorted(pairs):
        g.add_edge((USER, case.hex), (USER, suspect.hex), key=EXPOSED)
    return TraceGraph(g)


def super_spreaders(graph: TraceGraph, k: int = DEFAULT_SUPER_SPREADER_K) -> list[tuple[ReferenceCode, int]]:
    """Users with at least ``k`` distinct exposed contacts, highest degree first, ties by code."""
    if k < 1:
        raise ValueError("k must be >= 1")
    degrees = Counter(u for u, _, key in graph.graph.edges(keys=True) if key == EXPOSED)
    flagged = [(ReferenceCode.from_hex(u[1]), d) for u, d in degrees.items() if d >= k]
    flagged.sort(key=lambda item: (-item[1], item[0]))
    return flagged


def clusters_by(snapshot: RegistrySnapshot, key: str) -> list[tuple[str, int, int]]:
    """Rows of (attribute value, infected users, suspected users), sorted with 'unknown' last."""
    if key not in ("postcode", "age_group"):
        raise ValueError(f"cannot cluster by {key!r}")
    infected = snapshot.infected_uercs()
    suspected = snapshot.suspected_uercs()
    rows: dict[str, list[int]] = {}
    for user in snapshot.users:
        value = getattr(user, key) or UNKNOWN
        row = rows.setdefault(value, [0, 0])
        row[0] += user.uerc in infected
        row[1] += user.uerc in suspected
    ordered = sorted(rows, key=lambda v: (v == UNKNOWN, v))
    return [(v, rows[v][0], rows[v][1]) for v in ordered]
