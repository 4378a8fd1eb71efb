"""Parties, payloads, k-cast delivery and the synchronous round engine.

A run consists of numbered rounds. In each round every party may k-cast
messages; deliveries made in round ``r`` are visible to step functions from
round ``r + 1`` onwards. Faulty parties are driven by an adversary strategy
which receives the casts those parties would have sent honestly and returns
the casts they actually send.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Protocol

PartyId = int
Payload = tuple[int, ...]


class CastError(ValueError):
    """A cast with an invalid recipient set."""


class AuthenticationError(RuntimeError):
    """The adversary tried to speak for a compliant party."""


def zeros(length: int) -> Payload:
    return (0,) * length


def bits(text: str) -> Payload:
    """Parse ``"0110"`` into a payload."""
    if any(ch not in "01" for ch in text):
        raise ValueError(f"not a bit string: {text!r}")
    return tuple(int(ch) for ch in text)


def bitstr(payload: Payload) -> str:
    return "".join(str(b) for b in payload)


@dataclass(frozen=True)
class Config:
    """Parameters of one protocol level.

    ``n`` parties are present, ``d = h + f - n`` are missing. A fresh top
    level run always has ``d == 0``.
    """

    n: int
    k: int
    h: int
    f: int
    d: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.h < 2:
            raise ValueError(f"h must be >= 2, got {self.h}")
        if self.f < 0:
            raise ValueError(f"f must be >= 0, got {self.f}")
        if self.d < 0:
            raise ValueError(f"d must be >= 0, got {self.d}")
        if self.n != self.h + self.f - self.d:
            raise ValueError(
                f"n must equal h+f-d: n={self.n}, h={self.h}, f={self.f}, d={self.d}"
            )

    @classmethod
    def top(cls, k: int, h: int, f: int) -> Config:
        return cls(n=h + f, k=k, h=h, f=f, d=0)

    def shrink(self) -> Config:
        """Config for a level with one party fewer."""
        return Config(n=self.n - 1, k=self.k, h=self.h, f=self.f, d=self.d + 1)

    @property
    def achievable(self) -> bool:
        return 2 * self.f < self.k * self.h


@dataclass(frozen=True, order=True)
class Cast:
    round: int
    sender: PartyId
    recipients: tuple[PartyId, ...]
    payload: Payload

    def __post_init__(self):
        object.__setattr__(self, "recipients", tuple(sorted(self.recipients)))
        object.__setattr__(self, "payload", tuple(self.payload))


def check_cast(cast: Cast, n: int, width: int) -> None:
    """Validate the recipient set of ``cast``.

    ``width`` is the channel width actually usable in a run, ``min(k, n-1)``.
    """
    recips = cast.recipients
    if len(set(recips)) != len(recips):
        raise CastError(f"duplicate recipients in {recips}")
    if len(recips) != width:
        raise CastError(f"cast needs exactly {width} recipients, got {len(recips)}")
    if cast.sender in recips:
        raise CastError(f"sender {cast.sender} among its own recipients")
    if not 0 <= cast.sender < n or any(not 0 <= r < n for r in recips):
        raise CastError(f"party index out of range in {cast}")
    if any(b not in (0, 1) for b in cast.payload):
        raise CastError(f"payload is not a bit vector: {cast.payload}")


class Inbox:
    """Everything one party has received, keyed by (round, sender, recipients).

    When a faulty sender casts twice to the same set in the same round the
    first delivery in transcript order is the one that counts.
    """

    def __init__(self):
        self._slots: dict[tuple[int, PartyId, tuple[PartyId, ...]], Payload] = {}
        self.log: list[Cast] = []

    def add(self, cast: Cast) -> None:
        self.log.append(cast)
        self._slots.setdefault((cast.round, cast.sender, cast.recipients), cast.payload)

    def get(self, round_no: int, sender: PartyId, recipients: Iterable[PartyId]):
        return self._slots.get((round_no, sender, tuple(sorted(recipients))))

    def slots(self) -> dict:
        return dict(self._slots)


def deliver_cast(cast: Cast, inboxes: dict[PartyId, Inbox], n: int, width: int) -> None:
    """Hand ``cast`` to each of its recipients and nobody else."""
    check_cast(cast, n, width)
    for r in cast.recipients:
        inboxes[r].add(cast)


class Party(Protocol):
    pid: PartyId
    inbox: Inbox

    def emit(self, round_no: int) -> list[Cast]: ...


@dataclass
class Transcript:
    events: list[dict] = field(default_factory=list)

    def cast(self, c: Cast) -> None:
        self.events.append(
            {
                "kind": "cast",
                "round": c.round,
                "sender": c.sender,
                "recipients": list(c.recipients),
                "payload": bitstr(c.payload),
            }
        )

    def output(self, party: PartyId, role: str, value: Payload) -> None:
        self.events.append(
            {"kind": "output", "party": party, "role": role, "value": bitstr(value)}
        )

    def verdict(self, record: dict) -> None:
        self.events.append({"kind": "verdict", **record})

    def casts(self) -> list[dict]:
        return [e for e in self.events if e["kind"] == "cast"]

    def outputs(self) -> list[dict]:
        return [e for e in self.events if e["kind"] == "output"]

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(e, separators=(",", ":"), ensure_ascii=True) + "\n"
            for e in self.events
        )

    def write(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def read(cls, path) -> Transcript:
        with open(path, encoding="ascii") as fh:
            return cls([json.loads(line) for line in fh if line.strip()])


class Engine:
    """Deterministic synchronous round engine.

    ``adversary`` may be None. Otherwise it must expose ``corrupt`` (a set of
    party ids) and ``act(round_no, proposed) -> list[Cast]`` where
    ``proposed`` are the casts the faulty parties would send honestly.
    """

    def __init__(self, parties: dict[PartyId, Party], k: int, adversary=None, transcript=None):
        self.parties = parties
        self.n = len(parties)
        self.k = k
        self.width = min(k, self.n - 1)
        self.adversary = adversary
        self.corrupt = frozenset(adversary.corrupt) if adversary is not None else frozenset()
        self.transcript = transcript if transcript is not None else Transcript()
        self.inboxes = {pid: p.inbox for pid, p in parties.items()}
        self.cast_count = 0

    def run_round(self, round_no: int) -> list[Cast]:
        sent: list[Cast] = []
        proposed: list[Cast] = []
        for pid in sorted(self.parties):
            out = self.parties[pid].emit(round_no)
            (proposed if pid in self.corrupt else sent).extend(out)
        if self.corrupt:
            for c in self.adversary.act(round_no, proposed):
                if c.sender not in self.corrupt:
                    raise AuthenticationError(
                        f"round {round_no}: adversary cast attributed to compliant party {c.sender}"
                    )
                if c.round != round_no:
                    raise AuthenticationError(
                        f"round {round_no}: adversary cast stamped with round {c.round}"
                    )
                sent.append(c)
        sent.sort()
        for c in sent:
            deliver_cast(c, self.inboxes, self.n, self.width)
            self.transcript.cast(c)
        self.cast_count += len(sent)
        return sent

    def run(self, rounds: int) -> None:
        for r in range(rounds):
            self.run_round(r)
