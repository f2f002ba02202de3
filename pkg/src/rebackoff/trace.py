"""Run traces: per-slot columns, packet events and the per-packet ledger.

Traces are stored column-wise (one numpy array per SlotRecord field) so
long runs stay cheap; ``trace[t]`` and iteration materialize SlotRecord
objects on demand.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .adversary import AdversaryDirective
from .channel import outcome_from_counts

ACTIVATION, SUCCESS, RESET = 0, 1, 2
EVENT_NAMES = ("activation", "success", "reset")
EVENT_CODES = {name: i for i, name in enumerate(EVENT_NAMES)}

# single-channel slot designations (global and per packet)
IDLE, CONTROL, DATA, EXTRA = 0, 1, 2, 3
DESIGNATION_NAMES = ("idle", "control", "data", "extra")

COLUMNS = {
    "arrivals": np.int64,
    "disrupt_control": np.bool_,
    "disrupt_data": np.bool_,
    "control_tx": np.int64,  # -1 when the protocol has no control channel
    "data_tx": np.int64,
    "winner": np.int64,  # packet delivered in the slot, -1 otherwise
    "successes": np.int64,
    "live_count": np.int64,
    "active_count": np.int64,
    "contention": np.float64,
    "designation": np.int8,  # single channel only, -1 otherwise
    "system_empty": np.bool_,
}


@dataclass(frozen=True)
class Event:
    kind: str
    packet: int

    def to_dict(self):
        return {"kind": self.kind, "packet": self.packet}


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    directive: AdversaryDirective
    control_outcome: object
    data_outcome: object
    live_count: int
    active_count: int
    contention: float
    successes: int
    system_empty: bool
    designation: str | None = None
    events: tuple = ()
    designations: dict | None = None

    def to_dict(self):
        d = {
            "slot": self.slot,
            "directive": self.directive.to_dict(),
            "control": None if self.control_outcome is None else self.control_outcome.to_dict(),
            "data": self.data_outcome.to_dict(),
            "live_count": self.live_count,
            "active_count": self.active_count,
            "contention": self.contention,
            "successes": self.successes,
            "system_empty": self.system_empty,
        }
        if self.designation is not None:
            d["designation"] = self.designation
        if self.events:
            d["events"] = [e.to_dict() for e in self.events]
        if self.designations is not None:
            d["designations"] = {str(k): v for k, v in sorted(self.designations.items())}
        return d


@dataclass
class PacketRecord:
    id: int
    arrival: int
    activations: list = field(default_factory=list)
    resets: list = field(default_factory=list)
    success: int | None = None
    attempts_control: int = 0
    attempts_data: int = 0

    @property
    def attempts(self):
        return self.attempts_control + self.attempts_data

    def to_dict(self):
        return {
            "id": self.id,
            "arrival": self.arrival,
            "activations": list(self.activations),
            "resets": list(self.resets),
            "success": self.success,
            "attempts_control": self.attempts_control,
            "attempts_data": self.attempts_data,
        }


class Trace:
    """Complete history of one run.

    ``columns`` maps every name in COLUMNS to an array of length ``slots``;
    the same names are readable as attributes (``trace.contention``).
    ``events`` is an (E, 3) int array of (slot, packet, kind) in slot order.
    Per-packet tallies live in ``arrival``, ``success``, ``resets``,
    ``attempts_control`` and ``attempts_data`` (indexed by packet id).
    """

    def __init__(self, config, columns, events, packets, complete=True, designations=None):
        self.config = config
        self.columns = columns
        self.events = events
        self.arrival = packets["arrival"]
        self.success = packets["success"]
        self.resets = packets["resets"]
        self.attempts_control = packets["attempts_control"]
        self.attempts_data = packets["attempts_data"]
        self.complete = complete
        self.designations = designations
        self._ledger = None

    def __getattr__(self, name):
        columns = self.__dict__.get("columns")
        if columns is not None and name in columns:
            return columns[name]
        raise AttributeError(name)

    @property
    def protocol(self):
        return self.config.protocol

    @property
    def slots(self):
        return len(self.columns["arrivals"])

    @property
    def n_packets(self):
        return len(self.arrival)

    @property
    def single_channel(self):
        return self.config.protocol != "rebackoff2"

    @property
    def per_packet(self):
        return self.config.verbosity == "per_packet"

    @property
    def disrupted(self):
        """Per-slot disruption of the channel that carries messages."""
        if self.config.protocol == "rebackoff1":
            return self.disrupt_control | self.disrupt_data
        return self.disrupt_data

    @property
    def makespan(self):
        """Slot of the last success, or None if nothing succeeded."""
        done = self.success[self.success >= 0]
        return int(done.max()) if len(done) else None

    @property
    def live_at_end(self):
        return int(np.count_nonzero(self.success < 0))

    def events_in(self, slot):
        lo, hi = np.searchsorted(self.events[:, 0], [slot, slot + 1])
        return tuple(Event(EVENT_NAMES[k], int(p)) for _, p, k in self.events[lo:hi])

    def record(self, t):
        c = self.columns
        directive = AdversaryDirective(
            int(c["arrivals"][t]), bool(c["disrupt_control"][t]), bool(c["disrupt_data"][t])
        )
        if c["control_tx"][t] >= 0:
            control = outcome_from_counts(int(c["control_tx"][t]), directive.disrupt_control)
            data_disrupted = directive.disrupt_data
        else:
            control = None
            data_disrupted = directive.disrupt_data or (
                self.config.protocol == "rebackoff1" and directive.disrupt_control
            )
        data = outcome_from_counts(int(c["data_tx"][t]), data_disrupted, int(c["winner"][t]))
        des = int(c["designation"][t])
        return SlotRecord(
            slot=t,
            directive=directive,
            control_outcome=control,
            data_outcome=data,
            live_count=int(c["live_count"][t]),
            active_count=int(c["active_count"][t]),
            contention=float(c["contention"][t]),
            successes=int(c["successes"][t]),
            system_empty=bool(c["system_empty"][t]),
            designation=DESIGNATION_NAMES[des] if des >= 0 else None,
            events=self.events_in(t) if self.per_packet else (),
            designations=self.designations[t] if self.designations is not None else None,
        )

    def __getitem__(self, t):
        if t < 0:
            t += self.slots
        if not 0 <= t < self.slots:
            raise IndexError(t)
        return self.record(t)

    def __len__(self):
        return self.slots

    def __iter__(self):
        for t in range(self.slots):
            yield self.record(t)

    def ledger(self):
        """Per-packet ledger (activation/reset slots plus final tallies)."""
        if self._ledger is None:
            recs = [
                PacketRecord(
                    id=i,
                    arrival=int(self.arrival[i]),
                    success=int(self.success[i]) if self.success[i] >= 0 else None,
                    attempts_control=int(self.attempts_control[i]),
                    attempts_data=int(self.attempts_data[i]),
                )
                for i in range(self.n_packets)
            ]
            for slot, pid, kind in self.events.tolist():
                if kind == ACTIVATION:
                    recs[pid].activations.append(slot)
                elif kind == RESET:
                    recs[pid].resets.append(slot)
            self._ledger = recs
        return self._ledger

    def rebuild_ledger(self):
        """Ledger reconstructed from SlotRecords alone (per-packet verbosity).

        Attempt counts are not visible in slot records, so they are left 0.
        """
        recs = []
        for rec in self:
            for _ in range(rec.directive.arrivals):
                recs.append(PacketRecord(id=len(recs), arrival=rec.slot))
            for ev in rec.events:
                r = recs[ev.packet]
                if ev.kind == "activation":
                    r.activations.append(rec.slot)
                elif ev.kind == "reset":
                    r.resets.append(rec.slot)
                else:
                    r.success = rec.slot
        return recs

    def lifetimes(self):
        """(packet, first active slot, last active slot) for every lifetime.

        A lifetime ends at its reset or success slot, or at the last slot of
        the trace if it is still running.
        """
        return [tuple(row) for row in self.lifetime_array().tolist()]

    def lifetime_array(self):
        """``lifetimes()`` as an (L, 3) int array."""
        ev = self.events
        order = np.lexsort((ev[:, 2], ev[:, 0], ev[:, 1]))
        ev = ev[order]
        starts = np.flatnonzero(ev[:, 2] == ACTIVATION)
        nxt = starts + 1
        closed = nxt < len(ev)
        closed[closed] = (ev[nxt[closed], 1] == ev[starts[closed], 1]) & (ev[nxt[closed], 2] != ACTIVATION)
        ends = np.full(len(starts), self.slots - 1, dtype=np.int64)
        ends[closed] = ev[nxt[closed], 0]
        out = np.column_stack((ev[starts, 1], ev[starts, 0], ends)).astype(np.int64).reshape(-1, 3)
        return out[np.lexsort((out[:, 0], out[:, 1]))]

    def to_lines(self):
        """Serialized form: a header object, one object per slot, and (at
        per-packet verbosity) one object per packet."""
        header = {
            "type": "header",
            "config": self.config.to_dict(),
            "complete": self.complete,
            "slots": self.slots,
            "packets": self.n_packets,
        }
        yield json.dumps(header, sort_keys=True)
        for rec in self:
            yield json.dumps({"type": "slot", **rec.to_dict()}, sort_keys=True)
        if self.per_packet:
            for p in self.ledger():
                yield json.dumps({"type": "packet", **p.to_dict()}, sort_keys=True)

    def write(self, path):
        with open(path, "w") as fh:
            for line in self.to_lines():
                fh.write(line + "\n")


def read_trace_lines(path):
    """Parse a serialized trace into (header, slot dicts, packet dicts)."""
    header, slots, packets = None, [], []
    with open(path) as fh:
        for line in fh:
            obj = json.loads(line)
            kind = obj.pop("type")
            if kind == "header":
                header = obj
            elif kind == "slot":
                slots.append(obj)
            else:
                packets.append(obj)
    return header, slots, packets


class ColumnBuffer:
    """Growable column storage used while a run is in progress.

    It doubles as the ``history`` handed to adversaries: attribute access
    returns only the slots completed so far.
    """

    def __init__(self, capacity=1024):
        self.slots = 0
        self._data = {k: np.zeros(capacity, dtype=v) for k, v in COLUMNS.items()}

    def reserve(self, n):
        cap = len(self._data["arrivals"])
        if self.slots + n <= cap:
            return
        new = max(2 * cap, self.slots + n)
        for k, arr in self._data.items():
            grown = np.zeros(new, dtype=arr.dtype)
            grown[: self.slots] = arr[: self.slots]
            self._data[k] = grown

    def raw(self, name):
        return self._data[name]

    def __getattr__(self, name):
        data = self.__dict__.get("_data")
        if data is not None and name in data:
            return data[name][: self.slots]
        raise AttributeError(name)

    def finish(self):
        return {k: v[: self.slots].copy() for k, v in self._data.items()}
