"""Adversary strategies, ring/chain construction and the chain attack.

A strategy names the corrupted parties up front and rewrites their casts
round by round. Each scheduled cast of a corrupted party is a decision point
keyed ``(round, sender, recipients)``; the ideal primitives of the
broadcast/consensus reductions use string-tagged keys instead.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from itertools import combinations, product
from math import prod
from typing import Iterator, Optional

from .netmodel import Cast, Config, Payload, PartyId
from .protocol import Evaluation, PartyState, Schedule, build_schedule


class GuardError(ValueError):
    """Exhaustive enumeration refused for an instance that is too large."""


class ChainError(ValueError):
    """No (k, h)-chain exists, or a chain/pair choice is invalid."""


class Strategy:
    """Base strategy: corrupted parties follow the protocol."""

    kind = "honest"
    sender_input: Optional[Payload] = None

    def __init__(self, corrupt=()):
        self.corrupt = frozenset(corrupt)
        self.schedule: Optional[Schedule] = None

    def bind(self, schedule: Schedule) -> None:
        self.schedule = schedule

    def choose(self, point, honest: Payload) -> Optional[Payload]:
        """Payload to send at a decision point; None omits the cast."""
        return honest

    def extra(self, round_no: int) -> list[Cast]:
        return []

    def act(self, round_no: int, proposed: list[Cast]) -> list[Cast]:
        out = []
        for c in proposed:
            payload = self.choose((c.round, c.sender, c.recipients), c.payload)
            if payload is not None:
                out.append(replace(c, payload=tuple(payload)))
        return out + self.extra(round_no)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "corrupt": sorted(self.corrupt)}


class SilentStrategy(Strategy):
    """Corrupted parties never send anything."""

    kind = "silent"

    def choose(self, point, honest):
        return None


class ScriptedStrategy(Strategy):
    """Fixed payload per decision point; unscripted points behave honestly."""

    kind = "scripted"

    def __init__(self, corrupt, choices: dict, descriptor: Optional[dict] = None):
        super().__init__(corrupt)
        self.choices = {k: (None if v is None else tuple(v)) for k, v in choices.items()}
        self._descriptor = descriptor

    def choose(self, point, honest):
        return self.choices.get(point, honest)

    def descriptor(self) -> dict:
        if self._descriptor is not None:
            return dict(self._descriptor)
        return {
            "kind": "scripted",
            "corrupt": sorted(self.corrupt),
            "choices": [
                [_encode_point(p), None if v is None else "".join(map(str, v))]
                for p, v in sorted(self.choices.items(), key=lambda kv: repr(kv[0]))
            ],
        }


def _encode_point(point) -> list:
    return [point[0], point[1], list(point[2])] if len(point) == 3 else list(point)


def _decode_point(raw) -> tuple:
    return (raw[0], raw[1], tuple(raw[2])) if len(raw) == 3 else tuple(raw)


class RandomStrategy(Strategy):
    """Seeded random corruption of ``f`` parties and random rewriting.

    Every decision point independently keeps the honest payload, omits the
    cast, complements it, or replaces it with random bits. Corrupted parties
    also inject the occasional unscheduled cast.
    """

    kind = "random"
    junk_rate = 0.05

    def __init__(self, cfg: Config, seed: int):
        self.seed = seed
        self.rng = random.Random(seed)
        super().__init__(self.rng.sample(range(cfg.n), cfg.f))
        self.n = cfg.n
        self.k = cfg.k

    def choose(self, point, honest):
        move = self.rng.randrange(4)
        if move == 0:
            return honest
        if move == 1:
            return None
        if move == 2:
            return tuple(1 - b for b in honest)
        return tuple(self.rng.randrange(2) for _ in honest)

    def extra(self, round_no):
        inst = self.schedule.instance(round_no) if self.schedule else None
        if inst is None:
            return []
        width = min(self.k, self.n - 1)
        out = []
        for p in sorted(self.corrupt):
            if p == inst.sender or self.rng.random() >= self.junk_rate:
                continue
            others = [q for q in range(self.n) if q != p]
            recips = tuple(sorted(self.rng.sample(others, width)))
            payload = tuple(self.rng.randrange(2) for _ in range(inst.payload_len))
            out.append(Cast(round_no, p, recips, payload))
        return out

    def descriptor(self):
        return {"kind": "random", "seed": self.seed}


# -- exhaustive enumeration --

def decision_points(schedule: Schedule, corrupt, depth_bound: Optional[int] = None) -> list:
    """Scheduled casts of corrupted parties as ``(point, payload_len)`` pairs."""
    pts = []
    for inst in schedule.rounds:
        if inst.sender not in corrupt:
            continue
        if depth_bound is not None and inst.depth > depth_bound:
            continue
        for t in inst.cast_sets:
            pts.append(((inst.round, inst.sender, t), inst.payload_len))
    return pts


def corrupt_sets(n: int, f: int) -> Iterator[tuple[PartyId, ...]]:
    for size in range(0, min(f, n) + 1):
        yield from combinations(range(n), size)


def count_adversaries(cfg: Config, value_domain=(0, 1), depth_bound=None, sender: PartyId = 0) -> int:
    schedule = build_schedule(cfg, sender)
    total = 0
    for cs in corrupt_sets(cfg.n, cfg.f):
        pts = decision_points(schedule, set(cs), depth_bound)
        total += prod(len(value_domain) ** length for _, length in pts)
    return total


def enumerate_adversaries(cfg: Config, value_domain=(0, 1), depth_bound: Optional[int] = None,
                          max_n: int = 4, override_guard: bool = False,
                          sender: PartyId = 0) -> Iterator[ScriptedStrategy]:
    """Every deterministic strategy on the scheduled casts, in a fixed order.

    For each corrupt set of size at most ``f`` every assignment of payloads
    over ``value_domain`` to the corrupted parties' scheduled casts is
    produced. Unscheduled casts are ignored by the protocol, so they add
    nothing, and an omission reads the same as an all-zeros payload.
    """
    if cfg.n > max_n and not override_guard:
        raise GuardError(f"exhaustive enumeration over n={cfg.n} parties exceeds max_n={max_n}")
    schedule = build_schedule(cfg, sender)
    index = 0
    for cs in corrupt_sets(cfg.n, cfg.f):
        pts = decision_points(schedule, set(cs), depth_bound)
        options = [list(product(value_domain, repeat=length)) for _, length in pts]
        for combo in product(*options):
            desc = {"kind": "exhaustive", "index": index, "value_domain": list(value_domain),
                    "depth_bound": depth_bound}
            yield ScriptedStrategy(cs, {p: v for (p, _), v in zip(pts, combo)}, desc)
            index += 1


def enumerate_point_strategies(n: int, f: int, points_for, value_domain=(0, 1)) -> Iterator[ScriptedStrategy]:
    """Exhaustive strategies over caller-defined decision points.

    ``points_for(corrupt)`` returns ``[(point, length), ...]``.
    """
    for cs in corrupt_sets(n, f):
        pts = points_for(frozenset(cs))
        options = [list(product(value_domain, repeat=length)) for _, length in pts]
        for combo in product(*options):
            yield ScriptedStrategy(cs, {p: v for (p, _), v in zip(pts, combo)})


def random_adversary(cfg: Config, seed: int) -> RandomStrategy:
    return RandomStrategy(cfg, seed)


# -- (k, h)-rings and chains --

def ring_feasible(k: int, h: int, f: int) -> bool:
    return 2 * f >= k * h


@dataclass(frozen=True)
class ChainPartition:
    """A (k, h)-ring opened at the sender's cluster.

    ``ring[0]`` holds the sender. The chain reads ``S_0, ring[1], ...,
    ring[-1], S_1`` where both ends are copies of ``ring[0]``.
    """

    k: int
    h: int
    f: int
    ring: tuple[tuple[PartyId, ...], ...]

    @property
    def clusters(self) -> tuple[tuple[PartyId, ...], ...]:
        return (self.ring[0],) + self.ring[1:] + (self.ring[0],)

    @property
    def sender_cluster(self) -> tuple[PartyId, ...]:
        return self.ring[0]

    @property
    def middle(self) -> int:
        """Number of clusters strictly between the two sender copies."""
        return len(self.ring) - 1

    def validate(self) -> None:
        flat = [p for c in self.ring for p in c]
        if any(not c for c in self.ring):
            raise ChainError("empty cluster")
        if len(set(flat)) != len(flat):
            raise ChainError("clusters overlap")
        if sorted(flat) != list(range(self.h + self.f)):
            raise ChainError(f"clusters must cover parties 0..{self.h + self.f - 1}")
        if len(self.ring) < self.k + 2:
            raise ChainError(f"ring has {len(self.ring)} clusters, needs at least k+2={self.k + 2}")
        for i in range(len(self.ring)):
            a, b = self.ring[i], self.ring[(i + 1) % len(self.ring)]
            if len(a) + len(b) < self.h:
                raise ChainError(f"adjacent clusters {i},{(i + 1) % len(self.ring)} hold fewer than h={self.h} parties")


def build_chain(k: int, h: int, f: int, sender: PartyId = 0) -> ChainPartition:
    """Lay ``h + f`` parties out on a ring of ``k + 2`` clusters.

    Sizes alternate ceil(h/2), floor(h/2) around the ring; leftover parties
    are dealt out one per cluster starting from the sender's cluster.
    """
    if k < 1 or h < 2 or f < 0:
        raise ChainError(f"invalid parameters k={k}, h={h}, f={f}")
    count = k + 2
    sizes = [(h + 1) // 2 if i % 2 == 0 else h // 2 for i in range(count)]
    surplus = h + f - sum(sizes)
    if surplus < 0:
        raise ChainError(
            f"a ring of {count} clusters needs {sum(sizes)} parties but only h+f={h + f} exist "
            f"(requires 2f >= kh, got 2f={2 * f} < kh={k * h})"
        )
    for i in range(surplus):
        sizes[i % count] += 1
    order = [sender] + [p for p in range(h + f) if p != sender]
    ring, at = [], 0
    for s in sizes:
        ring.append(tuple(sorted(order[at:at + s])))
        at += s
    chain = ChainPartition(k, h, f, tuple(ring))
    chain.validate()
    return chain


class VirtualChain:
    """Honest execution of the protocol on the opened chain.

    Middle parties exist once, sender-cluster parties twice (copy 0 at the
    left end with sender input 0, copy 1 at the right end with input 1).
    Casts from middle parties reach both copies. A cast from copy ``c`` of a
    sender-cluster party is cut at the leftmost middle cluster it misses
    entirely and is heard only on side ``c`` of that cut.
    """

    def __init__(self, chain: ChainPartition, schedule: Schedule):
        self.chain = chain
        self.schedule = schedule
        self.sender = schedule.root.sender
        if self.sender not in chain.sender_cluster:
            raise ChainError(f"sender {self.sender} is not in the first ring cluster")
        length = schedule.root.payload_len
        self.s_members = set(chain.sender_cluster)
        self.pos: dict[PartyId, int] = {}
        for i, c in enumerate(chain.ring[1:], start=1):
            for p in c:
                self.pos[p] = i
        self.states: dict[tuple, PartyState] = {}
        for p in sorted(self.s_members):
            for copy in (0, 1):
                value = (copy,) * length if p == self.sender else None
                self.states[(p, copy)] = PartyState(p, schedule, value)
        for p in sorted(self.pos):
            self.states[(p, None)] = PartyState(p, schedule)
        self.emitted: dict[int, dict[tuple, list[Cast]]] = {}
        self.next_round = 0

    def node_position(self, node) -> int:
        p, copy = node
        if copy is None:
            return self.pos[p]
        return 0 if copy == 0 else self.chain.middle + 1

    def cut(self, recipients) -> int:
        """Position of the leftmost middle cluster that ``recipients`` misses."""
        rs = set(recipients)
        for i, c in enumerate(self.chain.ring[1:], start=1):
            if not rs.intersection(c):
                return i
        raise ChainError(f"cast to {sorted(rs)} reaches every middle cluster")

    def targets(self, node, cast: Cast) -> list[tuple]:
        p, copy = node
        out = []
        if copy is None:
            for q in cast.recipients:
                out.extend([(q, 0), (q, 1)] if q in self.s_members else [(q, None)])
            return out
        x = self.cut(cast.recipients)
        for q in cast.recipients:
            if q in self.s_members:
                out.append((q, copy))
            elif (0 if self.pos[q] < x else 1) == copy:
                out.append((q, None))
        return out

    def advance(self, round_no: int) -> dict[tuple, list[Cast]]:
        while self.next_round <= round_no:
            r = self.next_round
            emitted = {node: st.emit(r) for node, st in sorted(self.states.items(), key=lambda kv: _node_key(kv[0]))}
            for node in sorted(emitted, key=_node_key):
                for c in emitted[node]:
                    for t in self.targets(node, c):
                        self.states[t].inbox.add(c)
            self.emitted[r] = emitted
            self.next_round += 1
        return self.emitted[round_no]

    def values(self) -> dict[tuple, Payload]:
        """Value of every virtual node after the whole schedule has run."""
        self.advance(len(self.schedule.rounds) - 1)
        out = {}
        for node, st in sorted(self.states.items(), key=lambda kv: _node_key(kv[0])):
            if node[0] == self.sender:
                out[node] = st.value
            else:
                out[node] = Evaluation(st).output(self.schedule.root)
        return out


def _node_key(node):
    p, copy = node
    return (p, -1 if copy is None else copy)


class ChainAdversary(Strategy):
    """Chain attack keeping the clusters at chain positions ``pair`` and ``pair + 1`` compliant.

    All other parties are corrupted and act out the virtual chain execution,
    so every compliant party sees exactly what its virtual counterpart sees.
    If a sender copy is compliant the real sender gets that copy's input.
    """

    kind = "chain"

    def __init__(self, chain: ChainPartition, pair: int):
        chain.validate()
        clusters = chain.clusters
        if not 0 <= pair < len(clusters) - 1:
            raise ChainError(f"pair index {pair} is not an adjacent pair of the {len(clusters)}-cluster chain")
        compliant = set(clusters[pair]) | set(clusters[pair + 1])
        if len(compliant) < chain.h:
            raise ChainError(f"clusters {pair},{pair + 1} hold {len(compliant)} < h={chain.h} parties")
        n = chain.h + chain.f
        super().__init__(set(range(n)) - compliant)
        self.chain = chain
        self.pair = pair
        self.compliant = frozenset(compliant)
        if pair == 0:
            self.real_copy = 0
        elif pair + 1 == len(clusters) - 1:
            self.real_copy = 1
        else:
            self.real_copy = None
        self.virtual: Optional[VirtualChain] = None

    def bind(self, schedule: Schedule) -> None:
        super().bind(schedule)
        self.virtual = VirtualChain(self.chain, schedule)
        if self.real_copy is not None:
            self.sender_input = (self.real_copy,) * schedule.root.payload_len

    def real_node(self, p: PartyId) -> tuple:
        """The virtual node a compliant party plays."""
        return (p, self.real_copy) if p in self.virtual.s_members else (p, None)

    def _side(self, recipients) -> Optional[int]:
        """Chain side of the compliant recipients of a sender-cluster cast."""
        x = self.virtual.cut(recipients)
        sides = set()
        for q in recipients:
            if q in self.compliant:
                sides.add(0 if self.virtual.node_position(self.real_node(q)) < x else 1)
        if len(sides) > 1:
            raise ChainError(f"compliant recipients of {recipients} straddle the cut")
        return sides.pop() if sides else None

    def act(self, round_no, proposed):
        emitted = self.virtual.advance(round_no)
        out = []
        for p in sorted(self.corrupt):
            if p not in self.virtual.s_members:
                out.extend(emitted[(p, None)])
                continue
            copies = [{c.recipients: c for c in emitted[(p, copy)]} for copy in (0, 1)]
            for recips in sorted(set(copies[0]) | set(copies[1])):
                side = self._side(recips)
                pick = copies[side].get(recips) if side is not None else (
                    copies[0].get(recips) or copies[1].get(recips))
                if pick is not None:
                    out.append(pick)
        return out

    def descriptor(self):
        return {"kind": "chain", "pair": self.pair}


def chain_adversary(chain: ChainPartition, compliant_pair: int) -> ChainAdversary:
    return ChainAdversary(chain, compliant_pair)


def from_descriptor(desc: dict, cfg: Config, seed: int = 0, max_n: int = 4, override_guard: bool = False) -> Optional[Strategy]:
    """Rebuild a strategy from its JSON descriptor."""
    kind = desc.get("kind", "none")
    if kind == "none":
        return None
    if kind == "honest":
        return Strategy(desc.get("corrupt", ()))
    if kind == "silent":
        return SilentStrategy(desc.get("corrupt", range(cfg.f)))
    if kind == "random":
        return RandomStrategy(cfg, desc.get("seed", seed))
    if kind == "chain":
        return ChainAdversary(build_chain(cfg.k, cfg.h, cfg.f), desc["pair"])
    if kind == "exhaustive":
        idx = desc["index"]
        for i, st in enumerate(enumerate_adversaries(
                cfg, tuple(desc.get("value_domain", (0, 1))), desc.get("depth_bound"), max_n, override_guard)):
            if i == idx:
                return st
        raise ValueError(f"exhaustive strategy index {idx} out of range")
    if kind == "scripted":
        choices = {}
        for point, value in desc.get("choices", []):
            choices[_decode_point(point)] = None if value is None else tuple(int(b) for b in value)
        return ScriptedStrategy(desc.get("corrupt", ()), choices)
    raise ValueError(f"unknown adversary kind {kind!r}")

