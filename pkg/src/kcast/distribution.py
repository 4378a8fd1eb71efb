"""k-subset enumeration, the distribute primitive, and report predicates."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Optional

from .netmodel import Cast, Payload, PartyId, zeros

KSet = tuple[PartyId, ...]


@lru_cache(maxsize=None)
def _ksubsets(recipients: tuple[PartyId, ...], k: int) -> tuple[KSet, ...]:
    return tuple(combinations(recipients, k))


def ksubsets(recipients: Iterable[PartyId], k: int) -> list[KSet]:
    """All size-``k`` subsets of ``recipients`` in lexicographic order."""
    members = tuple(sorted(set(recipients)))
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(members) < k:
        raise ValueError(f"need at least {k} recipients for {k}-sets, got {len(members)}")
    return list(_ksubsets(members, k))


@lru_cache(maxsize=None)
def ksets_containing(recipients: tuple[PartyId, ...], k: int, owner: PartyId) -> tuple[KSet, ...]:
    """The k-sets of ``recipients`` that contain ``owner``, canonical order."""
    return tuple(t for t in _ksubsets(tuple(sorted(recipients)), k) if owner in t)


def distribute(round_no: int, sender: PartyId, value: Payload, recipients: Iterable[PartyId], k: int) -> list[Cast]:
    """One cast of ``value`` to every k-set of ``recipients``."""
    recipients = set(recipients)
    if sender in recipients:
        raise ValueError(f"sender {sender} cannot distribute to itself")
    return [Cast(round_no, sender, t, value) for t in ksubsets(recipients, k)]


@dataclass(frozen=True)
class Report:
    """A party's claimed sender values, one payload per k-set containing it."""

    owner: PartyId
    ksets: tuple[KSet, ...]
    values: tuple[Payload, ...]

    def __post_init__(self):
        if len(self.ksets) != len(self.values):
            raise ValueError("ksets and values differ in length")
        if any(self.owner not in t for t in self.ksets):
            raise ValueError(f"report of {self.owner} names a k-set without it")

    def as_dict(self) -> dict[KSet, Payload]:
        return dict(zip(self.ksets, self.values))

    @classmethod
    def from_slots(cls, owner, ksets, slots: dict, length: int) -> Report:
        """Build from a k-set -> payload lookup; missing entries read as zeros."""
        default = zeros(length)
        return cls(owner, tuple(ksets), tuple(slots.get(t, default) for t in ksets))

    def serialize(self) -> Payload:
        return tuple(b for v in self.values for b in v)

    @classmethod
    def deserialize(cls, owner, ksets, payload: Payload, length: int) -> Report:
        """Inverse of ``serialize`` for entries of ``length`` bits each.

        A payload of the wrong total size is replaced by zeros so that the
        result is always a well-formed report.
        """
        ksets = tuple(ksets)
        if len(payload) != len(ksets) * length:
            payload = zeros(len(ksets) * length)
        values = tuple(
            tuple(payload[i * length:(i + 1) * length]) for i in range(len(ksets))
        )
        return cls(owner, ksets, values)


def consistent(a: Report, b: Report) -> bool:
    """True iff ``a`` and ``b`` agree on every k-set containing both owners."""
    if a.owner == b.owner:
        raise ValueError("consistency is defined between distinct parties")
    bvals = b.as_dict()
    for t, v in zip(a.ksets, a.values):
        if b.owner in t:
            w = bvals.get(t)
            if w is None or len(w) != len(v) or w != v:
                return False
    return True


def uniform_value(r: Report) -> Optional[Payload]:
    if not r.values:
        raise ValueError(f"report of {r.owner} is empty")
    first = r.values[0]
    return first if all(v == first for v in r.values) else None
