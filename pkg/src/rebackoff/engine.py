"""Slotted simulation loop.

Each slot runs in a fixed order: the adversary commits to a directive from
the history so far, arrivals are injected as inactive packets, every live
packet draws from its own keyed random stream, the channels resolve, every
packet observes and updates, and the slot is recorded.

Two implementations share these semantics:

* ``World`` steps packets one at a time through the scalar state machines
  in :mod:`rebackoff.protocols`.  It is the only path for the
  single-channel protocol and serves as a reference for the others.
* numba kernels run two-channel Re-Backoff and binary exponential backoff
  in bulk; they reproduce ``World`` bit for bit.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from ._rng import (
    counter_state_nb,
    derive_key,
    packet_state_nb,
    stream_bits_nb,
    stream_uniform_nb,
    uniform,
)
from .adversary import ConfigError, make_adversary
from .channel import (
    Kind,
    ListenerView,
    TransmitterResult,
    listener_view,
    resolve_slot,
    transmitter_result,
)
from .protocols import (
    Activity,
    PacketState,
    Phase,
    ProtocolParams,
    SingleChannelPhase,
    beb_init,
    beb_step,
    rb1_decide,
    rb1_observe,
    rb2_decide,
    rb2_observe,
)
from .trace import (
    ACTIVATION,
    CONTROL,
    DATA,
    DESIGNATION_NAMES,
    EXTRA,
    IDLE,
    RESET,
    SUCCESS,
    ColumnBuffer,
    Trace,
)

PROTOCOLS = ("rebackoff2", "rebackoff1", "beb")
VERBOSITY = ("summary", "per_packet")
STOPS = ("all_done", "max_slots")


class AdversaryContractError(RuntimeError):
    """The adversary injected more packets than it declared."""


@dataclass(frozen=True)
class RunConfig:
    protocol: str = "rebackoff2"
    params: ProtocolParams = field(default_factory=ProtocolParams)
    adversary: dict = field(default_factory=lambda: {"kind": "batch", "n": 1})
    seed: int = 0
    stop: str = "all_done"
    max_slots: int = 10_000_000
    verbosity: str = "summary"

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.stop not in STOPS:
            raise ConfigError(f"unknown stop condition {self.stop!r}")
        if self.verbosity not in VERBOSITY:
            raise ConfigError(f"unknown verbosity {self.verbosity!r}")
        if self.max_slots < 0:
            raise ConfigError("max_slots must be >= 0")

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return {
            "protocol": self.protocol,
            "params": self.params.to_dict(),
            "adversary": self.adversary,
            "seed": self.seed,
            "stop": self.stop,
            "max_slots": self.max_slots,
            "verbosity": self.verbosity,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "params" in d:
            d["params"] = ProtocolParams(**d["params"])
        return cls(**d)


def _sorted_events(ev):
    ev = np.asarray(ev, dtype=np.int64).reshape(-1, 3)
    order = np.lexsort((ev[:, 1], ev[:, 2], ev[:, 0]))
    return ev[order]


# ---------------------------------------------------------------------------
# reference engine


class World:
    """Scalar simulation state; ``step()`` advances one slot.

    Used directly for the single-channel protocol and as the reference the
    fast kernels are tested against.
    """

    def __init__(self, config):
        self.config = config
        self.params = config.params
        self.adversary = make_adversary(config.adversary, config.seed)
        self.key = derive_key(config.seed)
        self.slot = 0
        self.columns = ColumnBuffer()
        self.events = []
        self.packets = {}  # pid -> protocol state, live packets only
        self.phases = {}  # rebackoff1 only
        self.ledger = _LedgerLists()
        self.injected = 0
        self.designations = [] if config.verbosity == "per_packet" else None
        self._prev_designation = {}

    @property
    def live(self):
        return len(self.packets)

    def finished(self):
        last = self.adversary.last_arrival_slot
        return last is not None and self.slot > last and not self.packets

    def step(self):
        t = self.slot
        directive = self.adversary.next(t, self.columns)
        self._inject(t, directive.arrivals)
        if self.config.protocol == "rebackoff2":
            row = self._step_rb2(t, directive)
        elif self.config.protocol == "rebackoff1":
            row = self._step_rb1(t, directive)
        else:
            row = self._step_beb(t, directive)
        row.update(
            arrivals=directive.arrivals,
            disrupt_control=directive.disrupt_control,
            disrupt_data=directive.disrupt_data,
        )
        self.columns.reserve(1)
        for k, v in row.items():
            self.columns.raw(k)[t] = v
        self.columns.slots += 1
        self.slot += 1
        return row

    def _inject(self, t, n):
        total = self.adversary.total
        if total is not None and self.injected + n > total:
            raise AdversaryContractError(f"adversary declared {total} packets but injected more")
        for _ in range(n):
            pid = self.injected
            self.injected += 1
            self.ledger.add(pid, t)
            if self.config.protocol == "beb":
                self.packets[pid] = [t, beb_init(uniform(self.key, pid, 0, 2))]
            else:
                self.packets[pid] = PacketState(id=pid, arrival_slot=t)
                if self.config.protocol == "rebackoff1":
                    self.phases[pid] = SingleChannelPhase()

    def _step_rb2(self, t, directive):
        params, key = self.params, self.key
        decisions = {}
        contention = 0.0
        for pid, st in self.packets.items():
            if st.activity is not Activity.ACTIVE:
                continue
            if st.data_slots_seen == 0 and st.age == 1:
                self.events.append((t, pid, ACTIVATION))
            contention += 1.0 / st.age
            dec, st = rb2_decide(st, params, (uniform(key, pid, t, 0), uniform(key, pid, t, 1)))
            self.packets[pid] = st
            decisions[pid] = dec
        control = resolve_slot([p for p, d in decisions.items() if d.send_control], directive.disrupt_control)
        senders = [p for p, d in decisions.items() if d.send_data]
        data = resolve_slot(senders, directive.disrupt_data)
        cview, dview = listener_view(control), listener_view(data)
        live = len(self.packets)
        successes = 0
        for pid in list(self.packets):
            st = self.packets[pid]
            result = transmitter_result(data, pid) if pid in decisions and decisions[pid].send_data else None
            before = st.activity
            st = rb2_observe(st, cview, dview, result, params, slot=t)
            if st.activity is Activity.DONE:
                successes += 1
                self._finish(t, pid, st.attempts_control, st.attempts_data)
                continue
            if before is Activity.ACTIVE and st.activity is Activity.INACTIVE:
                self.events.append((t, pid, RESET))
                self.ledger.resets[pid] += 1
            self.packets[pid] = st
        return dict(
            control_tx=control.count,
            data_tx=data.count,
            winner=data.packet if data.kind is Kind.SUCCESS else -1,
            successes=successes,
            live_count=live,
            active_count=len(decisions),
            contention=contention,
            designation=-1,
            system_empty=live == 0,
        )

    def _step_beb(self, t, directive):
        key = self.key
        sending = []
        contention = 0.0
        windows = np.zeros(63, np.int64)
        for pid, (start, st) in self.packets.items():
            windows[st.window.bit_length() - 1] += 1
            if st.position == st.chosen:
                sending.append(pid)
        # summed per window size, smallest first, so the total is order free
        for e in range(1, 63):
            if windows[e]:
                contention += int(windows[e]) * 2.0 ** (-e)
        data = resolve_slot(sending, directive.disrupt_data)
        live = len(self.packets)
        successes = 0
        for pid in list(self.packets):
            start, st = self.packets[pid]
            result = transmitter_result(data, pid) if pid in sending else None
            st, dec = beb_step(st, uniform(key, pid, st.window_index + 1, 2), result)
            self.ledger.attempts_data[pid] += dec.send_data
            if st.done:
                successes += 1
                self._finish(t, pid, 0, self.ledger.attempts_data[pid])
                continue
            self.packets[pid] = [start, st]
        return dict(
            control_tx=-1,
            data_tx=data.count,
            winner=data.packet if data.kind is Kind.SUCCESS else -1,
            successes=successes,
            live_count=live,
            active_count=live,
            contention=contention,
            designation=-1,
            system_empty=live == 0,
        )

    def _step_rb1(self, t, directive):
        params, key = self.params, self.key
        active = {}
        contention = 0.0
        n_active = 0
        sent = {}
        for pid, st in self.packets.items():
            if st.activity is not Activity.ACTIVE:
                continue
            ph = self.phases[pid]
            active[pid] = ph.phase
            if ph.first_slot:
                self.events.append((t, pid, ACTIVATION))
            if not ph.pending_termination:
                contention += 1.0 / st.age
                n_active += 1
            send, st = rb1_decide(st, ph, params, uniform(key, pid, t, 0))
            self.packets[pid] = st
            if send:
                sent[pid] = ph.phase
        outcome = resolve_slot(sent, directive.disrupted)
        view = listener_view(outcome)
        live = len(self.packets)
        successes = 0
        for pid in list(self.packets):
            st, ph = self.packets[pid], self.phases[pid]
            result = None
            if pid in sent and sent[pid] is not Phase.CONTROL:
                result = transmitter_result(outcome, pid)
                if result is TransmitterResult.SUCCEEDED:
                    # delivered now; the packet may still linger one listening slot
                    successes += 1
                    self._record_success(t, pid)
            before = st.activity
            st, ph = rb1_observe(st, ph, params, view, result, slot=t)
            if st.activity is Activity.DONE:
                self._depart(pid, st.attempts_control, st.attempts_data)
                continue
            if before is Activity.ACTIVE and st.activity is Activity.INACTIVE:
                self.events.append((t, pid, RESET))
                self.ledger.resets[pid] += 1
            self.packets[pid], self.phases[pid] = st, ph
        codes = {Phase.CONTROL: CONTROL, Phase.DATA: DATA, Phase.EXTRA: EXTRA}
        designation = IDLE
        if active:
            carried = [active[p] for p in active if p in self._prev_designation]
            designation = codes[carried[0]] if carried else CONTROL
        if self.designations is not None:
            self.designations.append({p: ph.value for p, ph in active.items()})
        self._prev_designation = active
        return dict(
            control_tx=-1,
            data_tx=outcome.count,
            winner=outcome.packet if outcome.kind is Kind.SUCCESS else -1,
            successes=successes,
            live_count=live,
            active_count=n_active,
            contention=contention,
            designation=designation,
            system_empty=live == 0,
        )

    def _record_success(self, t, pid):
        self.events.append((t, pid, SUCCESS))
        self.ledger.success[pid] = t

    def _depart(self, pid, att_c, att_d):
        self.ledger.attempts_control[pid] = att_c
        self.ledger.attempts_data[pid] = att_d
        del self.packets[pid]
        self.phases.pop(pid, None)

    def _finish(self, t, pid, att_c, att_d):
        self._record_success(t, pid)
        self._depart(pid, att_c, att_d)

    def trace(self, complete=True):
        for pid, st in self.packets.items():
            if self.config.protocol == "beb":
                continue
            self.ledger.attempts_control[pid] = st.attempts_control
            self.ledger.attempts_data[pid] = st.attempts_data
        return Trace(
            self.config,
            self.columns.finish(),
            _sorted_events(self.events),
            self.ledger.arrays(),
            complete=complete,
            designations=self.designations,
        )


class _LedgerLists:
    def __init__(self):
        self.arrival, self.success, self.resets = [], [], []
        self.attempts_control, self.attempts_data = [], []

    def add(self, pid, t):
        self.arrival.append(t)
        self.success.append(-1)
        self.resets.append(0)
        self.attempts_control.append(0)
        self.attempts_data.append(0)

    def arrays(self):
        return {k: np.asarray(v, dtype=np.int64) for k, v in vars(self).items()}


def run_reference(config):
    """Run ``config`` through the scalar ``World`` engine."""
    _check_stop(config)
    world = World(config)
    limit = config.max_slots
    while world.slot < limit:
        if config.stop == "all_done" and world.finished():
            break
        world.step()
    complete = config.stop == "max_slots" or world.finished()
    return world.trace(complete=complete)


def _check_stop(config):
    adv = make_adversary(config.adversary, config.seed)
    if config.stop == "all_done" and adv.last_arrival_slot is None:
        raise ConfigError("stop 'all_done' needs an adversary with finitely many arrivals")
    return adv


# ---------------------------------------------------------------------------
# fast kernels

# state row layout
_PID, _STATUS, _AGE, _EMPTY, _SEEN, _SENT = 0, 1, 2, 3, 4, 5
_WIN, _WSTART, _CHOSEN, _WIDX = 2, 3, 4, 5
_INACTIVE, _ACTIVE = 0, 1
# ledger row layout
_L_ARR, _L_SUCC, _L_RES, _L_ATTC, _L_ATTD = 0, 1, 2, 3, 4
# kernel exit codes
_RAN, _STOPPED, _NEED_EVENTS = 0, 1, 2


@njit(cache=True)
def _rb2_kernel(st, hb, ptab, n_rows, led, n_packets, arrivals, dc, dd, t0, n_slots,
                key, c, d, gnum, gden, stop_when_done, last_arrival,
                out_ctrl, out_data, out_win, out_succ, out_live, out_active,
                out_x, out_empty, ev, n_ev):
    for k in range(n_slots):
        t = t0 + k
        if stop_when_done and t > last_arrival and n_rows == 0:
            return k, n_rows, n_packets, n_ev, _STOPPED
        if n_ev + 2 * (n_rows + arrivals[k]) > ev.shape[0]:
            return k, n_rows, n_packets, n_ev, _NEED_EVENTS
        for _ in range(arrivals[k]):
            st[n_rows, _PID] = n_packets
            st[n_rows, _STATUS] = _INACTIVE
            st[n_rows, _AGE] = 1
            st[n_rows, _EMPTY] = 0
            st[n_rows, _SEEN] = 0
            hb[n_rows] = packet_state_nb(key, n_packets)
            led[n_packets, _L_ARR] = t
            led[n_packets, _L_SUCC] = -1
            n_rows += 1
            n_packets += 1
        nc = 0
        nd = 0
        winner = -1
        x = 0.0
        active = 0
        for i in range(n_rows):
            st[i, _SENT] = 0
            if st[i, _STATUS] != _ACTIVE:
                continue
            pid = st[i, _PID]
            s = st[i, _AGE]
            active += 1
            x += 1.0 / s
            if s == 1 and st[i, _SEEN] == 0:
                ev[n_ev, 0] = t
                ev[n_ev, 1] = pid
                ev[n_ev, 2] = 0
                n_ev += 1
            h = counter_state_nb(hb[i], t)
            if stream_bits_nb(h, 0) < ptab[s, 0]:
                nc += 1
                led[pid, _L_ATTC] += 1
            if stream_bits_nb(h, 1) < ptab[s, 1]:
                nd += 1
                winner = pid
                st[i, _SENT] = 1
                led[pid, _L_ATTD] += 1
        ctrl_empty = nc == 0 and not dc[k]
        data_empty = nd == 0 and not dd[k]
        success = nd == 1 and not dd[k]
        out_live[t] = n_rows
        out_empty[t] = n_rows == 0
        out_ctrl[t] = nc
        out_data[t] = nd
        out_win[t] = winner if success else -1
        out_active[t] = active
        out_x[t] = x
        done = 0
        i = 0
        while i < n_rows:
            status = st[i, _STATUS]
            if status == _INACTIVE:
                if ctrl_empty:
                    st[i, _STATUS] = _ACTIVE
                    st[i, _AGE] = 1
                    st[i, _EMPTY] = 0
                    st[i, _SEEN] = 0
            else:
                pid = st[i, _PID]
                if success and st[i, _SENT] == 1:
                    led[pid, _L_SUCC] = t
                    ev[n_ev, 0] = t
                    ev[n_ev, 1] = pid
                    ev[n_ev, 2] = 1
                    n_ev += 1
                    done += 1
                    n_rows -= 1
                    for j in range(st.shape[1]):
                        st[i, j] = st[n_rows, j]
                    hb[i] = hb[n_rows]
                    continue
                seen = st[i, _SEEN] + 1
                empty = st[i, _EMPTY] + (1 if data_empty else 0)
                st[i, _SEEN] = seen
                st[i, _EMPTY] = empty
                if empty * gden >= gnum * seen:
                    st[i, _STATUS] = _INACTIVE
                    led[pid, _L_RES] += 1
                    ev[n_ev, 0] = t
                    ev[n_ev, 1] = pid
                    ev[n_ev, 2] = 2
                    n_ev += 1
                else:
                    st[i, _AGE] += 1
            i += 1
        out_succ[t] = done
    return n_slots, n_rows, n_packets, n_ev, _RAN


@njit(cache=True)
def _heap_push(heap, n, key, val):
    i = n
    heap[i, 0] = key
    heap[i, 1] = val
    while i > 0:
        j = (i - 1) // 2
        if heap[j, 0] < heap[i, 0] or (heap[j, 0] == heap[i, 0] and heap[j, 1] <= heap[i, 1]):
            break
        for k in range(2):
            tmp = heap[i, k]
            heap[i, k] = heap[j, k]
            heap[j, k] = tmp
        i = j
    return n + 1


@njit(cache=True)
def _heap_pop(heap, n):
    n -= 1
    heap[0, 0] = heap[n, 0]
    heap[0, 1] = heap[n, 1]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= n:
            break
        m = l
        r = l + 1
        if r < n and (heap[r, 0] < heap[l, 0] or (heap[r, 0] == heap[l, 0] and heap[r, 1] < heap[l, 1])):
            m = r
        if heap[i, 0] < heap[m, 0] or (heap[i, 0] == heap[m, 0] and heap[i, 1] <= heap[m, 1]):
            break
        for k in range(2):
            tmp = heap[i, k]
            heap[i, k] = heap[m, k]
            heap[m, k] = tmp
        i = m
    return n


@njit(cache=True)
def _beb_kernel(st, heap, aux, n_rows, led, n_packets, arrivals, dc, dd, t0, n_slots,
                key, c, d, gnum, gden, stop_when_done, last_arrival,
                out_ctrl, out_data, out_win, out_succ, out_live, out_active,
                out_x, out_empty, ev, n_ev):
    # Event driven: st is indexed by packet id and holds (window exponent,
    # window start, chosen offset, window index, done).  The heap holds
    # keys 2*slot for window rollovers and 2*slot+1 for transmissions, so a
    # rollover is applied before a transmission in the same slot.
    # aux[0] is the heap size and aux[1 + e] the number of live packets
    # with window 2**e, from which contention is summed exactly.
    n_heap = aux[0]
    cnt = aux[1:]
    senders = np.empty(max(n_rows, 1) + 64, np.int64)
    for k in range(n_slots):
        t = t0 + k
        if stop_when_done and t > last_arrival and n_rows == 0:
            aux[0] = n_heap
            return k, n_rows, n_packets, n_ev, _STOPPED
        if n_ev + 1 > ev.shape[0]:
            aux[0] = n_heap
            return k, n_rows, n_packets, n_ev, _NEED_EVENTS
        for _ in range(arrivals[k]):
            pid = n_packets
            u = stream_uniform_nb(counter_state_nb(packet_state_nb(key, pid), 0), 2)
            ch = min(np.int64(u * 2), 1)
            st[pid, 0] = 1
            st[pid, 1] = t
            st[pid, 2] = ch
            st[pid, 3] = 0
            st[pid, 4] = 0
            cnt[1] += 1
            n_heap = _heap_push(heap, n_heap, 2 * (t + 2), pid)
            n_heap = _heap_push(heap, n_heap, 2 * (t + ch) + 1, pid)
            led[pid, _L_ARR] = t
            led[pid, _L_SUCC] = -1
            n_rows += 1
            n_packets += 1
        if senders.shape[0] < n_rows:
            senders = np.empty(2 * n_rows, np.int64)
        nd = 0
        while n_heap > 0 and heap[0, 0] < 2 * (t + 1):
            hk = heap[0, 0]
            pid = heap[0, 1]
            n_heap = _heap_pop(heap, n_heap)
            if st[pid, 4] == 1:
                continue
            if hk % 2 == 0:
                e = st[pid, 0]
                w = np.int64(1) << e
                widx = st[pid, 3] + 1
                u = stream_uniform_nb(counter_state_nb(packet_state_nb(key, pid), widx), 2)
                ch = min(np.int64(u * 2 * w), 2 * w - 1)
                cnt[e] -= 1
                cnt[e + 1] += 1
                st[pid, 0] = e + 1
                st[pid, 1] = t
                st[pid, 2] = ch
                st[pid, 3] = widx
                n_heap = _heap_push(heap, n_heap, 2 * (t + 2 * w), pid)
                n_heap = _heap_push(heap, n_heap, 2 * (t + ch) + 1, pid)
            else:
                senders[nd] = pid
                nd += 1
                led[pid, _L_ATTD] += 1
        x = 0.0
        for e in range(1, 63):
            if cnt[e]:
                x += cnt[e] * 2.0 ** (-e)
        success = nd == 1 and not dd[k]
        out_live[t] = n_rows
        out_empty[t] = n_rows == 0
        out_ctrl[t] = -1
        out_data[t] = nd
        out_win[t] = senders[0] if success else -1
        out_active[t] = n_rows
        out_x[t] = x
        done = 0
        if success:
            pid = senders[0]
            st[pid, 4] = 1
            cnt[st[pid, 0]] -= 1
            led[pid, _L_SUCC] = t
            ev[n_ev, 0] = t
            ev[n_ev, 1] = pid
            ev[n_ev, 2] = 1
            n_ev += 1
            done = 1
            n_rows -= 1
        out_succ[t] = done
    aux[0] = n_heap
    return n_slots, n_rows, n_packets, n_ev, _RAN


@njit(cache=True)
def _prob_table(n, c, d):
    """Row s holds the (control, data) send thresholds at age s.

    A draw u = m * 2**-53 satisfies u < p exactly when m < ceil(p * 2**53),
    so kernels compare the raw 53-bit integer against these.
    """
    tab = np.empty((n, 2), np.uint64)
    tab[0, 0] = tab[0, 1] = np.uint64(1) << np.uint64(53)
    for s in range(1, n):
        tab[s, 0] = np.uint64(np.ceil(min(c * max(np.log(s), 1.0) / s, 1.0) * 2.0**53))
        tab[s, 1] = np.uint64(np.ceil(min(d / s, 1.0) * 2.0**53))
    return tab


_KERNELS = {"rebackoff2": _rb2_kernel, "beb": _beb_kernel}


def _grow_rows(arr, need):
    if need <= arr.shape[0]:
        return arr
    grown = np.zeros((max(need, 2 * arr.shape[0]), arr.shape[1]), arr.dtype)
    grown[: arr.shape[0]] = arr
    return grown


def _run_fast(config, adversary):
    kernel = _KERNELS[config.protocol]
    params = config.params
    gnum, gden = params.gamma_ratio
    key = np.uint64(derive_key(config.seed))
    stop_when_done = config.stop == "all_done"
    last_arrival = -1 if adversary.last_arrival_slot is None else adversary.last_arrival_slot
    total = adversary.total
    chunk = 4096 if adversary.oblivious else 1

    cols = ColumnBuffer()
    beb = config.protocol == "beb"
    st = np.zeros((64, 6), np.int64)
    hb = np.zeros(64, np.uint64)
    heap = np.zeros((128, 2), np.int64)
    aux = np.zeros(64, np.int64)
    ptab = np.ones((0, 2), np.uint64)
    led = np.zeros((64, 5), np.int64)
    ev = np.zeros((1024, 3), np.int64)
    n_rows = n_packets = n_ev = 0
    injected = 0
    t = 0
    stopped = False
    while t < config.max_slots:
        if stop_when_done and t > last_arrival and n_rows == 0:
            stopped = True
            break
        n = min(chunk, config.max_slots - t)
        arrivals = np.zeros(n, np.int64)
        dc = np.zeros(n, np.bool_)
        dd = np.zeros(n, np.bool_)
        for k in range(n):
            dr = adversary.next(t + k, cols)
            arrivals[k], dc[k], dd[k] = dr.arrivals, dr.disrupt_control, dr.disrupt_data
        batch = int(arrivals.sum())
        if total is not None and injected + batch > total:
            raise AdversaryContractError(f"adversary declared {total} packets but injected more")
        if beb:
            # indexed by packet id; at most two pending heap entries per packet
            st = _grow_rows(st, n_packets + batch)
            heap = _grow_rows(heap, 2 * (n_packets + batch) + 2)
            scratch = (heap, aux)
        else:
            st = _grow_rows(st, n_rows + batch)
            if hb.shape[0] < st.shape[0]:
                hb = np.concatenate((hb, np.zeros(st.shape[0] - hb.shape[0], np.uint64)))
            # ages never exceed the slot count
            if ptab.shape[0] < t + n + 2:
                ptab = _prob_table(max(2 * ptab.shape[0], t + n + 2), params.c, params.d)
            scratch = (hb, ptab)
        led = _grow_rows(led, n_packets + batch)
        cols.reserve(n)
        k0 = 0
        while k0 < n:
            ran, n_rows2, n_packets2, n_ev, code = kernel(
                st, *scratch, n_rows, led, n_packets, arrivals[k0:], dc[k0:], dd[k0:], t + k0, n - k0,
                key, params.c, params.d, gnum, gden, stop_when_done, last_arrival,
                cols.raw("control_tx"), cols.raw("data_tx"), cols.raw("winner"),
                cols.raw("successes"), cols.raw("live_count"), cols.raw("active_count"),
                cols.raw("contention"), cols.raw("system_empty"), ev, n_ev,
            )
            n_rows, n_packets = n_rows2, n_packets2
            k0 += ran
            if code == _NEED_EVENTS:
                ev = _grow_rows(ev, 2 * ev.shape[0] + 2 * (n_rows + int(arrivals[k0:].max())))
            elif code == _STOPPED:
                break
        for name, arr in (("arrivals", arrivals), ("disrupt_control", dc), ("disrupt_data", dd)):
            cols.raw(name)[t: t + k0] = arr[:k0]
        cols.raw("designation")[t: t + k0] = -1
        injected += int(arrivals[:k0].sum())
        cols.slots += k0
        t += k0
        if k0 < n:
            stopped = True
            break
    complete = config.stop == "max_slots" or stopped
    led = led[:n_packets]
    packets = {
        "arrival": led[:, _L_ARR].copy(),
        "success": led[:, _L_SUCC].copy(),
        "resets": led[:, _L_RES].copy(),
        "attempts_control": led[:, _L_ATTC].copy(),
        "attempts_data": led[:, _L_ATTD].copy(),
    }
    return Trace(config, cols.finish(), _sorted_events(ev[:n_ev]), packets, complete=complete)


def run(config, engine="auto"):
    """Simulate one run and return its Trace.

    ``engine="reference"`` forces the scalar engine; the single-channel
    protocol always uses it.
    """
    adversary = _check_stop(config)
    if engine == "reference" or config.protocol == "rebackoff1":
        return run_reference(config)
    return _run_fast(config, adversary)


__all__ = [
    "AdversaryContractError",
    "RunConfig",
    "World",
    "run",
    "run_reference",
    "DESIGNATION_NAMES",
    "ListenerView",
]
