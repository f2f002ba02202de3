"""Arrival and disruption adversaries.

An adversary is asked once per slot, before any packet draws, for that
slot's directive.  It may look at everything recorded for earlier slots
(``history``) but never at the slot being decided.  Configs are plain
dicts so they round-trip through scenario files unchanged::

    {"kind": "composite", "parts": [
        {"kind": "batch", "n": 10},
        {"kind": "window_jammer", "intervals": [[5, 15]]}]}
"""
import math
from dataclasses import dataclass

from ._rng import derive_key, uniform


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AdversaryDirective:
    arrivals: int = 0
    disrupt_control: bool = False
    disrupt_data: bool = False

    @property
    def disrupted(self):
        return self.disrupt_control or self.disrupt_data

    def merge(self, other):
        return AdversaryDirective(
            self.arrivals + other.arrivals,
            self.disrupt_control or other.disrupt_control,
            self.disrupt_data or other.disrupt_data,
        )

    def to_dict(self):
        return {
            "arrivals": self.arrivals,
            "disrupt_control": self.disrupt_control,
            "disrupt_data": self.disrupt_data,
        }


QUIET = AdversaryDirective()


class Adversary:
    """Base class.

    ``total`` is the declared finite number of packets (None if the
    adversary does not commit to one).  ``last_arrival_slot`` is the last
    slot that can carry arrivals, -1 for pure jammers and None for endless
    streams; the engine uses it to decide when a run can be over.
    ``oblivious`` adversaries never read history, so the engine may ask
    them for many slots at once.
    """

    kind = "base"
    total = None
    last_arrival_slot = -1
    oblivious = True

    def next(self, slot, history=None):
        raise NotImplementedError

    def label(self):
        return self.kind


class Batch(Adversary):
    kind = "batch"

    def __init__(self, n, slot=0):
        if n < 0 or slot < 0:
            raise ConfigError("batch needs n >= 0 and slot >= 0")
        self.n = int(n)
        self.slot = int(slot)
        self.total = self.n
        self.last_arrival_slot = self.slot if self.n else -1

    def next(self, slot, history=None):
        return AdversaryDirective(self.n if slot == self.slot else 0)


class StreamBurst(Adversary):
    """One packet every ``period`` slots plus a single burst."""

    kind = "stream_burst"

    def __init__(self, period=3, burst_size=0, burst_slot=0, until=None):
        if period < 1 or burst_size < 0 or burst_slot < 0:
            raise ConfigError("stream_burst needs period >= 1, burst_size >= 0, burst_slot >= 0")
        self.period = int(period)
        self.burst_size = int(burst_size)
        self.burst_slot = int(burst_slot)
        self.until = None if until is None else int(until)
        if self.until is not None:
            self.last_arrival_slot = max(self.until - 1, self.burst_slot if self.burst_size else -1)
        else:
            self.last_arrival_slot = None

    def next(self, slot, history=None):
        n = 0
        if (self.until is None or slot < self.until) and slot % self.period == 0:
            n += 1
        if slot == self.burst_slot:
            n += self.burst_size
        return AdversaryDirective(n)


class Poisson(Adversary):
    """Poisson(rate) arrivals per slot; a benign, non-adversarial workload."""

    kind = "poisson"

    def __init__(self, rate, until=None, seed=0):
        if rate < 0:
            raise ConfigError("poisson rate must be >= 0")
        self.rate = float(rate)
        self.until = None if until is None else int(until)
        self.last_arrival_slot = None if until is None else self.until - 1
        if self.rate == 0:
            self.last_arrival_slot = -1
        self._key = derive_key(seed, 0x5015)

    def next(self, slot, history=None):
        if self.rate == 0 or (self.until is not None and slot >= self.until):
            return QUIET
        # inversion keyed on the slot, so the stream is a function of (seed, slot)
        u = uniform(self._key, 0, slot, 0)
        k, p = 0, math.exp(-self.rate)
        cdf = p
        while u >= cdf and p > 0:
            k += 1
            p *= self.rate / k
            cdf += p
        return AdversaryDirective(k)


_CHANNELS = ("control", "data", "both")


def _flags(channel):
    return channel in ("control", "both"), channel in ("data", "both")


class WindowJammer(Adversary):
    """Disrupts the half-open slot intervals given, optionally repeating
    them with a fixed period (``[[0, 1]]`` with period 10 jams every tenth
    slot).  Nothing is jammed from slot ``until`` on."""

    kind = "window_jammer"

    def __init__(self, intervals, channel="both", period=None, until=None):
        if channel not in _CHANNELS:
            raise ConfigError(f"channel must be one of {_CHANNELS}")
        self.intervals = [(int(a), int(b)) for a, b in intervals]
        if any(a < 0 or b < a for a, b in self.intervals):
            raise ConfigError("jam intervals must satisfy 0 <= start <= end")
        self.period = None if period is None else int(period)
        if self.period is not None and self.period < 1:
            raise ConfigError("jam period must be >= 1")
        self.until = None if until is None else int(until)
        self.channel = channel
        self._dc, self._dd = _flags(channel)

    def jammed(self, slot):
        if self.until is not None and slot >= self.until:
            return False
        s = slot % self.period if self.period else slot
        return any(a <= s < b for a, b in self.intervals)

    def next(self, slot, history=None):
        if self.jammed(slot):
            return AdversaryDirective(0, self._dc, self._dd)
        return QUIET


class SpoofJammer(Adversary):
    """Fakes the busy tone from slot ``start`` on, so inactive packets
    cannot activate while active ones keep backing off, then goes silent.

    It stops after ``spoof_length`` slots.  With ``stop_age`` set the attack
    is adaptive: it also stops once the harmonic-mean age of active packets
    in a recorded slot reaches ``stop_age``.
    """

    kind = "spoof_jammer"

    def __init__(self, spoof_length=None, stop_age=None, start=0):
        if spoof_length is None and stop_age is None:
            raise ConfigError("spoof_jammer needs spoof_length or stop_age")
        if start < 0:
            raise ConfigError("spoof_jammer start must be >= 0")
        self.start = int(start)
        self.spoof_length = None if spoof_length is None else int(spoof_length)
        self.stop_age = None if stop_age is None else float(stop_age)
        self.oblivious = self.stop_age is None
        # scan memo: (slots scanned, first slot meeting the stop condition)
        self._scanned = 0
        self._trigger = None

    def _triggered_before(self, slot, history):
        if history is None:
            return False
        if slot < self._scanned:
            self._scanned, self._trigger = 0, None
        if self._trigger is None:
            active, x = history.active_count, history.contention
            for t in range(max(self._scanned, self.start), slot):
                if active[t] and active[t] / x[t] >= self.stop_age:
                    self._trigger = t
                    break
            self._scanned = slot
        return self._trigger is not None and self._trigger < slot

    def next(self, slot, history=None):
        if slot < self.start:
            return QUIET
        if self.spoof_length is not None and slot >= self.start + self.spoof_length:
            return QUIET
        if self.stop_age is not None and self._triggered_before(slot, history):
            return QUIET
        return AdversaryDirective(0, True, False)


class Composite(Adversary):
    """Sums arrivals and ORs disruption flags of its parts."""

    kind = "composite"

    def __init__(self, parts):
        if not parts:
            raise ConfigError("composite needs at least one part")
        self.parts = list(parts)
        totals = [p.total for p in self.parts if p.last_arrival_slot != -1]
        self.total = sum(totals) if all(t is not None for t in totals) else None
        lasts = [p.last_arrival_slot for p in self.parts]
        self.last_arrival_slot = None if any(l is None for l in lasts) else max(lasts)
        self.oblivious = all(p.oblivious for p in self.parts)

    def next(self, slot, history=None):
        out = QUIET
        for p in self.parts:
            out = out.merge(p.next(slot, history))
        return out

    def label(self):
        return "+".join(p.label() for p in self.parts)


_KINDS = {
    "batch": (Batch, {"n", "slot"}),
    "stream_burst": (StreamBurst, {"period", "burst_size", "burst_slot", "until"}),
    "poisson": (Poisson, {"rate", "until"}),
    "window_jammer": (WindowJammer, {"intervals", "channel", "period", "until"}),
    "spoof_jammer": (SpoofJammer, {"spoof_length", "stop_age", "start"}),
}


def make_adversary(config, seed=0):
    """Instantiate an adversary from its config dict.

    Sub-adversaries of a composite get distinct derived seeds.
    """
    if not isinstance(config, dict) or "kind" not in config:
        raise ConfigError(f"adversary config needs a 'kind': {config!r}")
    kind = config["kind"]
    params = {k: v for k, v in config.items() if k != "kind"}
    if kind == "composite":
        parts = params.pop("parts", None)
        if params or not isinstance(parts, list):
            raise ConfigError("composite takes exactly a 'parts' list")
        return Composite([make_adversary(p, derive_key(seed, i)) for i, p in enumerate(parts)])
    if kind not in _KINDS:
        raise ConfigError(f"unknown adversary kind {kind!r}")
    cls, allowed = _KINDS[kind]
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"unknown keys for {kind}: {sorted(unknown)}")
    try:
        if cls is Poisson:
            return cls(seed=seed, **params)
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind}: {exc}") from None
