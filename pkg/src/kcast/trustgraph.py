"""Trust graphs: recipients linked by consistent reports, plus sender clusters.

A sender cluster ``S_v`` stands for the sender together with the ``d``
missing parties claiming value ``v``; it is a clique of ``1 + d`` nodes
joined to every recipient whose report is uniformly ``v``. Pruning removes
edges that lie in no bi-star until none are left; a party then outputs the
value of the unique cluster it can still reach.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .distribution import Report, consistent, uniform_value
from .netmodel import Config, Payload, PartyId, zeros


class TrustNode(NamedTuple):
    kind: str  # "R" recipient, "S" sender cluster member
    party: PartyId
    value: Payload = ()
    member: int = 0

    @classmethod
    def recipient(cls, party: PartyId) -> TrustNode:
        return cls("R", party)

    @classmethod
    def cluster(cls, value: Payload, member: int) -> TrustNode:
        return cls("S", -1, tuple(value), member)

    @property
    def is_cluster(self) -> bool:
        return self.kind == "S"

    def label(self) -> str:
        if self.kind == "R":
            return f"R{self.party}"
        width = max(1, (len(self.value) + 3) // 4)
        num = int("".join(map(str, self.value)) or "0", 2)
        return f"S{num:0{width}x}#{self.member}"


@dataclass(frozen=True)
class TrustGraph:
    nodes: tuple[TrustNode, ...]
    adj: dict  # TrustNode -> frozenset[TrustNode]
    h: int

    @classmethod
    def from_edges(cls, nodes, edges, h: int) -> TrustGraph:
        adj = {v: set() for v in nodes}
        for a, b in edges:
            if a == b:
                raise ValueError(f"self loop at {a}")
            adj[a].add(b)
            adj[b].add(a)
        return cls(tuple(sorted(nodes)), {v: frozenset(s) for v, s in adj.items()}, h)

    def has_edge(self, a, b) -> bool:
        return b in self.adj.get(a, ())

    def edges(self) -> list[tuple[TrustNode, TrustNode]]:
        return sorted((a, b) for a in self.nodes for b in self.adj[a] if a < b)

    def clusters(self) -> list[Payload]:
        return sorted({v.value for v in self.nodes if v.is_cluster})

    def dump(self) -> str:
        """Adjacency list with stable ordering, one node per line."""
        lines = []
        for v in self.nodes:
            nbrs = " ".join(u.label() for u in sorted(self.adj[v]))
            lines.append(f"{v.label()}: {nbrs}".rstrip())
        return "\n".join(lines) + "\n"


def build_trust_graph(agreed: Sequence[Report], cfg: Config) -> TrustGraph:
    owners = [r.owner for r in agreed]
    if len(set(owners)) != len(owners):
        raise ValueError(f"duplicate report owners: {sorted(owners)}")
    reports = sorted(agreed, key=lambda r: r.owner)
    nodes = [TrustNode.recipient(r.owner) for r in reports]
    edges = []
    for i, a in enumerate(reports):
        for b in reports[i + 1:]:
            if consistent(a, b):
                edges.append((TrustNode.recipient(a.owner), TrustNode.recipient(b.owner)))

    by_value: dict[Payload, list[PartyId]] = {}
    for r in reports:
        v = uniform_value(r) if r.values else None
        if v is not None:
            by_value.setdefault(v, []).append(r.owner)
    for v in sorted(by_value):
        members = [TrustNode.cluster(v, j) for j in range(1 + cfg.d)]
        nodes.extend(members)
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                edges.append((members[x], members[y]))
        for owner in by_value[v]:
            edges.extend((m, TrustNode.recipient(owner)) for m in members)
    return TrustGraph.from_edges(nodes, edges, cfg.h)


def has_bistar(g: TrustGraph, a: TrustNode, b: TrustNode) -> bool:
    """Whether edge (a, b) is the center pair of an h-node bi-star."""
    if a == b:
        raise ValueError("bi-star centers must differ")
    if not g.has_edge(a, b):
        return False
    return len(g.adj[a] & g.adj[b]) >= g.h - 2


def prune(g: TrustGraph, rng: Optional[random.Random] = None) -> TrustGraph:
    """Remove edges outside every bi-star until none are left.

    With ``rng`` the failing edge to remove next is drawn at random; the
    fixpoint does not depend on the order.
    """
    need = g.h - 2
    adj = {v: set(s) for v, s in g.adj.items()}

    def fails(a, b):
        return b in adj[a] and len(adj[a] & adj[b]) < need

    if rng is None:
        queue = deque(g.edges())
        queued = set(queue)
        while queue:
            a, b = queue.popleft()
            queued.discard((a, b))
            if not fails(a, b):
                continue
            adj[a].discard(b)
            adj[b].discard(a)
            for x in (a, b):
                for c in adj[x]:
                    e = (x, c) if x < c else (c, x)
                    if e not in queued:
                        queued.add(e)
                        queue.append(e)
    else:
        while True:
            bad = sorted(
                (a, b) for a in adj for b in adj[a] if a < b and fails(a, b)
            )
            if not bad:
                break
            a, b = rng.choice(bad)
            adj[a].discard(b)
            adj[b].discard(a)
    return TrustGraph(g.nodes, {v: frozenset(s) for v, s in adj.items()}, g.h)


def reachable(g: TrustGraph, start: TrustNode) -> set[TrustNode]:
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for u in g.adj[v]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return seen


@dataclass(frozen=True)
class Decision:
    value: Payload
    reached: tuple[Payload, ...]

    @property
    def anomaly(self) -> bool:
        return len(self.reached) > 1


def decide(g: TrustGraph, self_id: PartyId, length: int) -> Decision:
    """Output the value of the unique reachable sender cluster, else zeros.

    ``length`` is the payload length of the level, used for the default.
    Reaching more than one cluster yields the default and flags an anomaly.
    """
    me = TrustNode.recipient(self_id)
    if me not in g.adj:
        raise ValueError(f"party {self_id} is not a recipient node of the graph")
    reached = tuple(sorted({v.value for v in reachable(g, me) if v.is_cluster}))
    value = reached[0] if len(reached) == 1 else zeros(length)
    return Decision(value, reached)


def cluster_conflicts(g: TrustGraph) -> list[tuple[Payload, ...]]:
    """Connected components that join two or more distinct sender clusters."""
    seen: set[TrustNode] = set()
    bad = []
    for v in g.nodes:
        if v in seen or not v.is_cluster:
            continue
        comp = reachable(g, v)
        seen |= comp
        values = tuple(sorted({u.value for u in comp if u.is_cluster}))
        if len(values) > 1:
            bad.append(values)
    return bad
