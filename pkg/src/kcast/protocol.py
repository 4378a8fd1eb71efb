"""Recursive Byzantine agreement over k-cast channels.

The sender distributes its value to every k-set of the other participants.
Each recipient then re-broadcasts what it received (its report) through a
recursive call among everyone but the sender, and finally decides on its own
trust graph built from the agreed reports. Once the recipients fit into a
single k-cast the received payload is output directly.

Recursive calls run one after another: every instance owns exactly one round
of the schedule, assigned in pre-order, so a round number identifies both the
instance and the sender that is expected to speak in it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

from .distribution import KSet, Report, ksets_containing, ksubsets
from .netmodel import Cast, Config, Engine, Inbox, Payload, PartyId, Transcript, zeros
from .trustgraph import build_trust_graph, cluster_conflicts, decide, prune


class BudgetError(ValueError):
    """More parties corrupted than the run allows."""


@dataclass(eq=False)
class Instance:
    """One level of the recursion: who takes part, who sends, with what config."""

    path: tuple[PartyId, ...]
    participants: tuple[PartyId, ...]
    sender: PartyId
    cfg: Config
    depth: int
    round: int
    payload_len: int
    parent: Optional[Instance] = None
    children: dict = field(default_factory=dict)
    cast_sets: tuple[KSet, ...] = ()

    @property
    def recipients(self) -> tuple[PartyId, ...]:
        return tuple(p for p in self.participants if p != self.sender)

    @property
    def base(self) -> bool:
        return len(self.participants) - 1 <= self.cfg.k

    def report_ksets(self, owner: PartyId) -> tuple[KSet, ...]:
        return ksets_containing(self.recipients, self.cfg.k, owner)

    def __repr__(self):
        return f"Instance(path={self.path}, round={self.round}, n={len(self.participants)})"


@dataclass
class Schedule:
    cfg: Config
    root: Instance
    rounds: list[Instance]

    @property
    def n(self) -> int:
        return self.cfg.n

    def instance(self, round_no: int) -> Optional[Instance]:
        return self.rounds[round_no] if 0 <= round_no < len(self.rounds) else None

    def cast_total(self) -> int:
        return sum(len(inst.cast_sets) for inst in self.rounds)


def build_schedule(cfg: Config, sender: PartyId = 0, payload_len: int = 1) -> Schedule:
    if cfg.d != 0:
        raise ValueError("a schedule starts from a full top level (d = 0)")
    n, k = cfg.n, cfg.k
    rounds: list[Instance] = []

    def make(participants, snd, level_cfg, depth, length, parent, path):
        inst = Instance(path, participants, snd, level_cfg, depth, len(rounds), length, parent)
        rounds.append(inst)
        recips = inst.recipients
        if inst.base:
            # fewer than k recipients only happens at the top level, where width = n - 1
            inst.cast_sets = (recips,)
            return inst
        inst.cast_sets = tuple(ksubsets(recips, k))
        for i in recips:
            child_len = len(inst.report_ksets(i)) * length
            inst.children[i] = make(recips, i, level_cfg.shrink(), depth + 1, child_len, inst, path + (i,))
        return inst

    root = make(tuple(range(n)), sender, cfg, 0, payload_len, None, (sender,))
    return Schedule(cfg, root, rounds)


def cast_cost(n: int, k: int) -> int:
    """Casts of one broadcast among ``n`` participants (closed recursion)."""
    if n - 1 <= k:
        return 1
    from math import comb

    return comb(n - 1, k) + (n - 1) * cast_cost(n - 1, k)


class PartyState:
    """Honest step function of one party. Only reads deliveries of past rounds."""

    def __init__(self, pid: PartyId, schedule: Schedule, value: Optional[Payload] = None):
        self.pid = pid
        self.schedule = schedule
        self.value = value
        self.inbox = Inbox()

    def received(self, inst: Instance, recipients: KSet) -> Payload:
        got = self.inbox.get(inst.round, inst.sender, recipients)
        if got is None or len(got) != inst.payload_len:
            return zeros(inst.payload_len)
        return got

    def report(self, inst: Instance) -> Report:
        ksets = inst.report_ksets(self.pid)
        return Report(self.pid, ksets, tuple(self.received(inst, t) for t in ksets))

    def emit(self, round_no: int) -> list[Cast]:
        inst = self.schedule.instance(round_no)
        if inst is None or inst.sender != self.pid:
            return []
        if inst.parent is None:
            payload = self.value if self.value is not None else zeros(inst.payload_len)
        else:
            payload = self.report(inst.parent).serialize()
        return [Cast(round_no, self.pid, t, payload) for t in inst.cast_sets]


class Evaluation:
    """Computes a party's outputs for every instance it receives in."""

    def __init__(self, state: PartyState):
        self.state = state
        self.memo: dict[tuple, Payload] = {}
        self.anomalies: list[dict] = []

    def output(self, inst: Instance) -> Payload:
        key = inst.path
        if key not in self.memo:
            self.memo[key] = self._compute(inst)
        return self.memo[key]

    def _compute(self, inst: Instance) -> Payload:
        me = self.state.pid
        if inst.base:
            return self.state.received(inst, inst.cast_sets[0])
        agreed = []
        for i in inst.recipients:
            if i == me:
                agreed.append(self.state.report(inst))
            else:
                got = self.output(inst.children[i])
                agreed.append(Report.deserialize(i, inst.report_ksets(i), got, inst.payload_len))
        g = prune(build_trust_graph(agreed, inst.cfg))
        for values in cluster_conflicts(g):
            self.anomalies.append(
                {"kind": "cluster-path", "party": me, "path": list(inst.path), "values": [list(v) for v in values]}
            )
        dec = decide(g, me, inst.payload_len)
        if dec.anomaly:
            self.anomalies.append(
                {"kind": "multi-cluster", "party": me, "path": list(inst.path), "values": [list(v) for v in dec.reached]}
            )
        return dec.value


@dataclass
class BroadcastResult:
    cfg: Config
    sender: PartyId
    input: Payload
    corrupt: frozenset
    values: dict  # compliant party -> value (the sender's value is its input)
    anomalies: list
    sub_agreement: list
    casts: int
    transcript: Transcript

    @property
    def sender_compliant(self) -> bool:
        return self.sender not in self.corrupt

    @property
    def agreement(self) -> bool:
        return len(set(self.values.values())) <= 1

    @property
    def validity(self) -> Optional[bool]:
        if not self.sender_compliant:
            return None
        return all(v == self.input for v in self.values.values())

    @property
    def sub_agreement_violations(self) -> list:
        return [r for r in self.sub_agreement if not r["agreement"] and not r["excused"]]


def broadcast(k: int, h: int, f: int, value: Payload = (1,), strategy=None, sender: PartyId = 0,
              transcript: Optional[Transcript] = None) -> BroadcastResult:
    """Run the protocol once among ``h + f`` parties.

    ``strategy`` drives the corrupted parties; it may fix the sender's input
    through a ``sender_input`` attribute. Raises ``BudgetError`` when more
    than ``f`` parties are corrupted.
    """
    cfg = Config.top(k, h, f)
    corrupt = frozenset(strategy.corrupt) if strategy is not None else frozenset()
    if len(corrupt) > f:
        raise BudgetError(f"{len(corrupt)} corrupted parties exceed the budget f={f}")
    if any(not 0 <= p < cfg.n for p in corrupt):
        raise BudgetError(f"corrupt set {sorted(corrupt)} names unknown parties")
    value = tuple(value)
    schedule = build_schedule(cfg, sender, len(value))
    if strategy is not None:
        strategy.bind(schedule)
        forced = getattr(strategy, "sender_input", None)
        if forced is not None:
            value = tuple(forced)
    parties = {p: PartyState(p, schedule, value if p == sender else None) for p in range(cfg.n)}
    transcript = transcript if transcript is not None else Transcript()
    engine = Engine(parties, k, strategy if corrupt else None, transcript)
    engine.run(len(schedule.rounds))

    root = schedule.root
    evals = {p: Evaluation(parties[p]) for p in range(cfg.n) if p not in corrupt and p != sender}
    values = {}
    for p in range(cfg.n):
        if p in corrupt:
            continue
        if p == sender:
            values[p] = value
            transcript.output(p, "sender", value)
        else:
            values[p] = evals[p].output(root)
            transcript.output(p, "recipient", values[p])

    sub = []
    if not root.base:
        for i in root.recipients:
            child = root.children[i]
            seen = {j: ev.output(child) for j, ev in evals.items() if j != i}
            if i not in corrupt:
                seen[i] = parties[i].report(root).serialize()
            sub.append({
                "sub_sender": i,
                "agreement": len(set(seen.values())) <= 1,
                "excused": sender not in corrupt and i in corrupt,
            })
    anomalies = [a for p in sorted(evals) for a in evals[p].anomalies]
    return BroadcastResult(cfg, sender, value, corrupt, values, anomalies, sub, engine.cast_count, transcript)


# -- reductions between broadcast and consensus (compliant majority only) --

def majority(values) -> Payload:
    """Most frequent value; ties go to the smallest value."""
    counts = Counter(tuple(v) for v in values)
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def _require_majority(cfg: Config) -> None:
    if cfg.h <= cfg.f:
        raise BudgetError(
            f"broadcast and consensus are only interchangeable with a compliant majority (h={cfg.h}, f={cfg.f})"
        )


def _corrupt_of(strategy, cfg: Config) -> frozenset:
    corrupt = frozenset(strategy.corrupt) if strategy is not None else frozenset()
    if len(corrupt) > cfg.f:
        raise BudgetError(f"{len(corrupt)} corrupted parties exceed the budget f={cfg.f}")
    return corrupt


def _chosen(strategy, point, honest: Payload) -> Payload:
    # an omitted value reads as zeros, as on the channel
    v = strategy.choose(point, honest)
    return zeros(len(honest)) if v is None else tuple(v)


def ideal_broadcast(strategy=None) -> Callable:
    """Broadcast primitive that always delivers one value to everyone."""

    def primitive(sender: PartyId, value: Payload, parties) -> dict:
        if strategy is not None and sender in strategy.corrupt:
            value = _chosen(strategy, ("broadcast", sender), value)
        return {q: value for q in parties}

    return primitive


def protocol_broadcast(k: int, h: int, f: int, strategy_for: Callable) -> Callable:
    """Broadcast primitive backed by ``broadcast``; ``strategy_for(sender)`` gives the adversary."""

    def primitive(sender: PartyId, value: Payload, parties) -> dict:
        res = broadcast(k, h, f, value, strategy_for(sender), sender=sender)
        return {q: res.values.get(q) for q in parties}

    return primitive


@dataclass
class ReductionResult:
    corrupt: frozenset
    values: dict  # compliant party -> output value

    @property
    def agreement(self) -> bool:
        return len(set(self.values.values())) <= 1


def consensus_from_broadcast(inputs: dict, cfg: Config, strategy=None, primitive: Optional[Callable] = None) -> ReductionResult:
    """Everyone broadcasts its input and outputs the majority of what it got."""
    _require_majority(cfg)
    corrupt = _corrupt_of(strategy, cfg)
    primitive = primitive or ideal_broadcast(strategy)
    parties = list(range(cfg.n))
    views = {q: [] for q in parties}
    for p in parties:
        delivered = primitive(p, tuple(inputs.get(p, (0,))), parties)
        for q in parties:
            views[q].append(delivered[q])
    values = {q: majority(views[q]) for q in parties if q not in corrupt}
    return ReductionResult(corrupt, values)


def ideal_consensus(submitted: dict) -> Payload:
    """Consensus primitive: the majority of all submitted values."""
    return majority(submitted[p] for p in sorted(submitted))


def broadcast_from_consensus(sender_input: Payload, cfg: Config, strategy=None, sender: PartyId = 0,
                             consensus: Callable = ideal_consensus) -> ReductionResult:
    """The sender hands its input to everyone, then all run consensus on it."""
    _require_majority(cfg)
    corrupt = _corrupt_of(strategy, cfg)
    sender_input = tuple(sender_input)
    submitted = {}
    for q in range(cfg.n):
        got = sender_input
        if sender in corrupt and q != sender:
            got = _chosen(strategy, ("send", q), sender_input)
        if q in corrupt:
            got = _chosen(strategy, ("consensus", q), got)
        submitted[q] = got
    common = consensus(submitted)
    values = {q: (sender_input if q == sender else common) for q in range(cfg.n) if q not in corrupt}
    return ReductionResult(corrupt, values)
