"""Metrics and analysis constructs computed from traces, plus Monte Carlo
checks of the single-slot probability bounds.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from .protocols import ProtocolParams
from .trace import ACTIVATION, DATA, EXTRA

# ---------------------------------------------------------------------------
# contention and the young/old split


def contention(ages):
    """Sum of 1/age over the active packets."""
    return float(math.fsum(1.0 / a for a in ages))


def _exact_half_check(mask, ages):
    # exact comparison of sum(1/a for masked a) against X/2
    part = sum((Fraction(1, int(a)) for a, m in zip(ages, mask) if m), Fraction(0))
    total = sum((Fraction(1, int(a)) for a in ages), Fraction(0))
    return part >= total / 2


def sigma(ages):
    """Smallest age whose young side (ages <= it) and old side (ages >= it)
    each carry at least half the contention.

    Sorts the ages and returns the one at the first prefix whose reciprocal
    sum reaches half the total.
    """
    a = np.sort(np.asarray(ages, dtype=np.int64))
    if a.size == 0:
        raise ValueError("sigma needs at least one age")
    inv = 1.0 / a
    prefix = np.cumsum(inv)
    half = prefix[-1] / 2
    tol = 1e-9 * prefix[-1]
    k = int(np.searchsorted(prefix, half - tol))
    # near-ties are settled exactly
    while k < a.size and abs(prefix[k] - half) <= tol:
        if _exact_half_check(np.arange(a.size) <= k, a):
            break
        k += 1
    return int(a[k])


def sigma_oracle(ages):
    """Brute force: try every distinct age in increasing order and return
    the first that satisfies both half-contention conditions."""
    a = np.asarray(ages, dtype=np.int64)
    if a.size == 0:
        raise ValueError("sigma needs at least one age")
    inv = 1.0 / a
    total = inv.sum()
    half = total / 2
    tol = 1e-9 * total
    cands = np.unique(a)
    young = (a[None, :] <= cands[:, None]) @ inv
    old = (a[None, :] >= cands[:, None]) @ inv
    for c, y, o in zip(cands, young, old):
        ok_y = y > half + tol or (abs(y - half) <= tol and _exact_half_check(a <= c, a))
        ok_o = o > half + tol or (abs(o - half) <= tol and _exact_half_check(a >= c, a))
        if ok_y and ok_o:
            return int(c)
    raise AssertionError("no age satisfies both conditions")  # cannot happen


# ---------------------------------------------------------------------------
# throughput and waste


@dataclass(frozen=True)
class Metrics:
    """Throughput/waste over ``[start, end)``, counting only slots with at
    least one live packet.  Ratios are None when that count is zero."""

    start: int
    end: int
    slots: int
    successes: int
    disrupted: int
    throughput: float | None
    non_waste: float | None
    waste: float | None
    makespan: int | None = None

    @property
    def defined(self):
        return self.slots > 0

    def to_dict(self):
        return {
            "start": self.start,
            "end": self.end,
            "slots": self.slots,
            "N": self.successes,
            "D": self.disrupted,
            "lambda": self.throughput,
            "Lambda": self.non_waste,
            "waste": self.waste,
            "makespan": self.makespan,
        }


def metrics_from_counts(slots, successes, disrupted, start=0, end=None, makespan=None):
    end = slots if end is None else end
    if slots == 0:
        return Metrics(start, end, 0, successes, disrupted, None, None, None, makespan)
    lam = successes / slots
    big = (successes + disrupted) / slots
    return Metrics(start, end, slots, successes, disrupted, lam, big, 1.0 - big, makespan)


def interval_metrics(trace, start=0, end=None):
    end = trace.slots if end is None else min(end, trace.slots)
    live = ~trace.system_empty[start:end]
    n = int(trace.successes[start:end][live].sum())
    dis = int(trace.disrupted[start:end][live].sum())
    return metrics_from_counts(int(live.sum()), n, dis, start, end, trace.makespan)


def run_metrics(trace):
    """Metrics of a whole run: ``[0, T]`` with T the last completion for a
    finished finite run, otherwise every recorded slot."""
    if trace.complete and trace.live_at_end == 0 and trace.makespan is not None:
        return interval_metrics(trace, 0, trace.makespan + 1)
    return interval_metrics(trace, 0, trace.slots)


# ---------------------------------------------------------------------------
# epochs, streaks and interstitial slots


@dataclass
class Segment:
    kind: str  # "unit_epoch", "epoch" or "interstitial"
    start: int
    end: int  # exclusive slot index
    start_contention: float
    disrupted: bool = False
    streaks: list = field(default_factory=list)  # (start, end, sigma) per streak

    @property
    def length(self):
        return self.end - self.start


class _AgeIndex:
    """Ages of the packets active in a given slot, rebuilt from lifetimes.

    For the single-channel protocol the age is the number of control slots
    the packet has been through in its current lifetime.
    """

    def __init__(self, trace):
        self.trace = trace
        arr = trace.lifetime_array()
        self.pids, self.starts, self.ends = arr[:, 0], arr[:, 1], arr[:, 2]

    def __call__(self, t):
        m = (self.starts <= t) & (self.ends >= t)
        if self.trace.protocol != "rebackoff1":
            return t - self.starts[m] + 1
        des = self.trace.designations
        ages = []
        for pid, a in zip(self.pids[m].tolist(), self.starts[m].tolist()):
            ages.append(max(1, sum(des[s].get(pid) == "control" for s in range(a, t + 1))))
        return np.array(ages, dtype=np.int64)


def _counted_data_mask(trace):
    """Slots whose data observation counts toward the reset rule."""
    if trace.config.protocol == "rebackoff2":
        return ~trace.system_empty
    des = trace.designation
    nxt = np.append(des[1:], -1)
    return (des == EXTRA) | ((des == DATA) & (nxt != EXTRA))


def segment_epochs(trace, unit_threshold=None):
    """Split the non-empty part of the timeline into unit epochs, epochs
    (chains of streaks) and interstitial runs.

    For the single-channel protocol the unit of time is the slot-group (a
    control slot plus its data slots) and the default threshold is 32.
    """
    single = trace.config.protocol == "rebackoff1"
    if unit_threshold is None:
        unit_threshold = 32.0 if single else 8.0
    if single and trace.designations is None:
        raise ValueError("single-channel segmentation needs per-packet verbosity")
    T = trace.slots
    empty = trace.system_empty
    x = trace.contention
    if single:
        des = trace.designation
        starts = [t for t in range(T) if des[t] != DATA and des[t] != EXTRA or t == 0]
    else:
        starts = list(range(T))
    unit_of = np.zeros(T + 1, dtype=np.int64)
    bounds = starts + [T]
    for u in range(len(starts)):
        unit_of[bounds[u]: bounds[u + 1]] = u
    unit_of[T] = len(starts)
    U = len(starts)
    act_units = set(int(unit_of[s]) for s in trace.events[trace.events[:, 2] == ACTIVATION, 0])
    unit_empty = np.array([bool(empty[bounds[u]: bounds[u + 1]].all()) for u in range(U)], dtype=bool)
    ages_at = _AgeIndex(trace)
    disrupted = trace.disrupted
    counted = _counted_data_mask(trace) if single else np.ones(T, dtype=bool)

    def make(kind, u0, u1, x0, streaks=()):
        s0, s1 = bounds[u0], bounds[u1]
        m = counted[s0:s1]
        denom = int(m.sum())
        dis = denom > 0 and 4 * int(disrupted[s0:s1][m].sum()) >= denom
        return Segment(kind, s0, s1, float(x0), dis, list(streaks))

    segments = []
    u = 0
    while u < U:
        if unit_empty[u]:
            u += 1
            continue
        if u in act_units:
            x0 = x[bounds[u]]
            if x0 < unit_threshold:
                segments.append(make("unit_epoch", u, u + 1, x0))
                u += 1
                continue
            streaks = []
            s = u
            while True:
                ages = ages_at(bounds[s])
                sig = sigma(ages) if len(ages) else 1
                e = s + 1
                while e < s + sig and e < U and e not in act_units and not unit_empty[e]:
                    e += 1
                streaks.append((bounds[s], bounds[e], sig))
                if e >= U or e in act_units or unit_empty[e] or x[bounds[e]] < unit_threshold:
                    break
                s = e
            segments.append(make("epoch", u, e, x0, streaks))
            u = e
            continue
        e = u + 1
        while e < U and e not in act_units and not unit_empty[e]:
            e += 1
        segments.append(make("interstitial", u, e, x[bounds[u]]))
        u = e
    return segments


# ---------------------------------------------------------------------------
# per-packet statistics


@dataclass(frozen=True)
class AttemptStats:
    attempts: np.ndarray
    mean: float
    ratio: np.ndarray  # attempts / ln^2(slots in system)
    mean_ratio: float


def attempts_stats(trace):
    att = trace.attempts_control + trace.attempts_data
    end = np.where(trace.success >= 0, trace.success, trace.slots - 1)
    in_system = np.maximum(end - trace.arrival + 1, 1)
    ratio = att / np.log(np.maximum(in_system, math.e)) ** 2
    mean = float(att.mean()) if len(att) else 0.0
    return AttemptStats(att, mean, ratio, float(ratio.mean()) if len(att) else 0.0)


@dataclass(frozen=True)
class ResetStats:
    histogram: dict  # resets -> packets
    tail: dict  # k -> (P(>=k+1)/P(>=k), packets with >= k resets)


def reset_stats(traces):
    """Reset-count distribution over one trace or a list of traces."""
    if not isinstance(traces, (list, tuple)):
        traces = [traces]
    resets = np.concatenate([tr.resets for tr in traces]) if traces else np.zeros(0, np.int64)
    values, counts = np.unique(resets, return_counts=True)
    hist = {int(v): int(c) for v, c in zip(values, counts)}
    tail = {}
    top = int(resets.max()) if len(resets) else 0
    for k in range(top + 1):
        at_least = int((resets >= k).sum())
        if at_least:
            tail[k] = (int((resets >= k + 1).sum()) / at_least, at_least)
    return ResetStats(hist, tail)


# ---------------------------------------------------------------------------
# single-slot probability bounds


@dataclass
class BoundReport:
    ages: tuple
    d: float
    trials: int
    contention: float
    estimates: dict
    standard_errors: dict
    exact: dict
    bounds: dict
    verdicts: dict

    @property
    def passed(self):
        return all(self.verdicts.values())


def exact_slot_probabilities(ages, d):
    """Exact P(success), P(busy), P(collision) for one data slot."""
    p = [min(1.0, d / a) for a in ages]
    none = math.prod(1 - q for q in p)
    one = sum(q * math.prod(1 - r for j, r in enumerate(p) if j != i) for i, q in enumerate(p))
    return {"success": one, "busy": 1 - none, "collision": 1 - none - one}


def slot_bounds(x, d):
    dx = d * x
    return {
        "success_min": dx * math.exp(-2 * dx),
        "busy_min": 1 - math.exp(-dx),
        "busy_max": 1 - math.exp(-2 * dx),
        "collision_max": (1 - math.exp(-2 * dx)) ** 2,
    }


def check_slot_bounds(ages, params=None, trials=100_000, seed=0):
    """Simulate ``trials`` independent data slots for a fixed set of ages
    and compare success/busy/collision frequencies with the analytic
    bounds, allowing three standard errors (one-sided)."""
    params = params or ProtocolParams()
    ages = tuple(int(a) for a in ages)
    probs = np.array([min(1.0, params.d / a) for a in ages])
    rng = np.random.default_rng(seed)
    counts = np.zeros(3, dtype=np.int64)  # success, busy, collision
    chunk = max(1, 2_000_000 // max(len(ages), 1))
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        k = (rng.random((n, len(ages))) < probs).sum(axis=1) if ages else np.zeros(n, np.int64)
        counts += [(k == 1).sum(), (k >= 1).sum(), (k >= 2).sum()]
        done += n
    est = dict(zip(("success", "busy", "collision"), (counts / trials).tolist()))
    se = {k: math.sqrt(v * (1 - v) / trials) for k, v in est.items()}
    x = contention(ages)
    b = slot_bounds(x, params.d)
    verdicts = {
        "success": est["success"] >= b["success_min"] - 3 * se["success"],
        "busy_lower": est["busy"] >= b["busy_min"] - 3 * se["busy"],
        "busy_upper": est["busy"] <= b["busy_max"] + 3 * se["busy"],
        "collision": est["collision"] <= b["collision_max"] + 3 * se["collision"],
    }
    return BoundReport(ages, params.d, trials, x, est, se, exact_slot_probabilities(ages, params.d), b, verdicts)


@dataclass(frozen=True)
class TrialPrefixReport:
    p: float
    horizon: int
    trials: int
    forced: int
    fraction: float
    standard_error: float

    @property
    def passed(self):
        return self.fraction >= 0.5 - 3 * self.standard_error


def prefixes_ok(successes, p):
    """True if every prefix i of the 0/1 sequence holds >= i*p/4 successes."""
    s = np.cumsum(np.asarray(successes, dtype=np.int64), axis=-1)
    i = np.arange(1, s.shape[-1] + 1)
    return np.all(4 * s >= i * p - 1e-12, axis=-1)


def check_trial_prefixes(p, horizon, trials=10_000, seed=0):
    """Bernoulli(p) sequences conditioned on their first 16/p trials all
    succeeding; measures how often every prefix keeps >= i*p/4 successes."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    forced = math.ceil(16 / p - 1e-12)
    if horizon < forced:
        raise ValueError("horizon shorter than the conditioned prefix")
    rng = np.random.default_rng(seed)
    good = 0
    chunk = max(1, 8_000_000 // horizon)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        seq = rng.random((n, horizon)) < p
        seq[:, :forced] = True
        good += int(prefixes_ok(seq, p).sum())
        done += n
    frac = good / trials
    return TrialPrefixReport(p, horizon, trials, forced, frac, math.sqrt(frac * (1 - frac) / trials))


# ---------------------------------------------------------------------------
# deterministic consequences of the reset rule and of synchronization


def prefix_violations(full, gamma=15 / 16):
    """Prefix lengths (>= 2) of a lifetime's counted data slots in which
    fewer than a (1 - gamma) fraction were full."""
    num, den = ProtocolParams(gamma=gamma).gamma_ratio
    f = np.cumsum(np.asarray(full, dtype=np.int64))
    L = np.arange(1, len(f) + 1)
    bad = (f * den < (den - num) * L) & (L >= 2)
    return [int(v) for v in L[bad]]


@njit(cache=True)
def _scan_lifetimes(full, starts, ends, pids, num, den, limit):
    # violations as (packet, start, prefix length), at most ``limit`` kept
    out = np.empty((limit, 3), np.int64)
    n = 0
    total = 0
    for j in range(len(starts)):
        f = 0
        for t in range(starts[j], ends[j] + 1):
            f += full[t]
            L = t - starts[j] + 1
            if L >= 2 and f * den < (den - num) * L:
                if n < limit:
                    out[n, 0] = pids[j]
                    out[n, 1] = starts[j]
                    out[n, 2] = L
                    n += 1
                total += 1
    return out[:n], total


def _single_channel_logs(trace):
    full = (trace.data_tx > 0) | trace.disrupted
    if trace.designations is None:
        raise ValueError("single-channel prefix check needs per-packet verbosity")
    des = trace.designations
    for pid, a, e in trace.lifetimes():
        log = []
        for t in range(a, e + 1):
            mine = des[t].get(pid)
            if mine == "extra" or (
                mine == "data" and not (t + 1 < len(des) and des[t + 1].get(pid) == "extra")
            ):
                log.append(bool(full[t]))
        yield pid, a, np.array(log, dtype=bool)


def check_prefix_fullness(trace, limit=1000):
    """List of (packet, lifetime start, prefix length) violations; empty
    whenever the reset rule was applied correctly.  At most ``limit`` are
    listed."""
    if trace.protocol == "beb":
        return []
    num, den = trace.config.params.gamma_ratio
    if trace.protocol == "rebackoff2":
        full = ((trace.data_tx > 0) | trace.disrupted).astype(np.int64)
        lt = trace.lifetime_array()
        found, _ = _scan_lifetimes(full, lt[:, 1], lt[:, 2], lt[:, 0], num, den, limit)
        return [tuple(int(v) for v in row) for row in found]
    out = []
    for pid, a, log in _single_channel_logs(trace):
        out.extend((pid, a, L) for L in prefix_violations(log, trace.config.params.gamma))
    return out[:limit]


def check_sync_agreement(trace):
    """Slots where two packets active in both t-1 and t disagree on
    whether t is a control slot.  Returns (slot, {packet: designation})."""
    if trace.designations is None:
        raise ValueError("sync check needs a single-channel trace at per-packet verbosity")
    des = trace.designations
    out = []
    for t in range(1, len(des)):
        prev, cur = des[t - 1], des[t]
        both = {p: cur[p] for p in cur if p in prev}
        kinds = {v == "control" for v in both.values()}
        if len(kinds) > 1:
            out.append((t, both))
    return out


__all__ = [
    "AttemptStats",
    "BoundReport",
    "Metrics",
    "ResetStats",
    "Segment",
    "TrialPrefixReport",
    "attempts_stats",
    "check_prefix_fullness",
    "check_slot_bounds",
    "check_sync_agreement",
    "check_trial_prefixes",
    "contention",
    "exact_slot_probabilities",
    "interval_metrics",
    "metrics_from_counts",
    "prefix_violations",
    "prefixes_ok",
    "reset_stats",
    "run_metrics",
    "segment_epochs",
    "sigma",
    "sigma_oracle",
    "slot_bounds",
]
