"""Slotted channel semantics.

A slot resolves to one of four outcomes.  Listeners only learn whether the
slot was full or empty; a transmitter additionally learns whether its own
transmission got through.
"""
from dataclasses import dataclass
from enum import Enum


class Kind(str, Enum):
    EMPTY = "empty"
    SUCCESS = "success"
    COLLISION = "collision"
    DISRUPTED = "disrupted"


class ListenerView(str, Enum):
    EMPTY = "empty"
    FULL = "full"


class TransmitterResult(str, Enum):
    SUCCEEDED = "succeeded"
    FAILED = "failed"


@dataclass(frozen=True)
class SlotOutcome:
    """Resolved state of one channel in one slot.

    ``count`` is the number of transmitters and is kept for diagnostics;
    ``packet`` is set only for a success.
    """

    kind: Kind
    count: int = 0
    packet: int | None = None

    @classmethod
    def empty(cls):
        return cls(Kind.EMPTY, 0)

    @classmethod
    def success(cls, packet):
        return cls(Kind.SUCCESS, 1, packet)

    @classmethod
    def collision(cls, count):
        if count < 2:
            raise ValueError("a collision needs at least two transmitters")
        return cls(Kind.COLLISION, count)

    @classmethod
    def disrupted(cls, count=0):
        return cls(Kind.DISRUPTED, count)

    @property
    def full(self):
        return self.kind is not Kind.EMPTY

    def to_dict(self):
        d = {"kind": self.kind.value, "count": self.count}
        if self.packet is not None:
            d["packet"] = self.packet
        return d


def resolve_slot(transmitters, disrupted=False):
    transmitters = set(transmitters)
    n = len(transmitters)
    if disrupted:
        return SlotOutcome.disrupted(n)
    if n == 0:
        return SlotOutcome.empty()
    if n == 1:
        return SlotOutcome.success(next(iter(transmitters)))
    return SlotOutcome.collision(n)


def outcome_from_counts(count, disrupted, winner=-1):
    """Rebuild an outcome from the columnar form stored in traces."""
    if disrupted:
        return SlotOutcome.disrupted(count)
    if count == 0:
        return SlotOutcome.empty()
    if count == 1:
        return SlotOutcome.success(int(winner))
    return SlotOutcome.collision(count)


def listener_view(outcome):
    return ListenerView.FULL if outcome.full else ListenerView.EMPTY


def transmitter_result(outcome, packet, transmitters=None):
    """What ``packet`` learns about its own transmission.

    Callers must only ask on behalf of a packet that actually transmitted.
    When the transmitter set is at hand it is checked; otherwise the
    outcome must at least contain a transmitter.
    """
    if transmitters is not None:
        assert packet in transmitters, f"packet {packet} did not transmit"
    assert outcome.count >= 1, "nobody transmitted in this slot"
    if outcome.kind is Kind.SUCCESS and outcome.packet == packet:
        return TransmitterResult.SUCCEEDED
    return TransmitterResult.FAILED
