"""Per-packet state machines for Re-Backoff and binary exponential backoff.

These are the scalar, one-packet-at-a-time definitions.  The engine's fast
path runs vectorized kernels that must agree with them slot for slot, and
the reference engine is built directly on top of this module.
"""
import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

from .channel import ListenerView, TransmitterResult


class Activity(str, Enum):
    INACTIVE = "inactive"
    ACTIVE = "active"
    DONE = "done"


class Phase(str, Enum):
    CONTROL = "control"
    DATA = "data"
    EXTRA = "extra"


@dataclass(frozen=True)
class ProtocolParams:
    c: float = 2.0
    d: float = 0.5
    gamma: float = 15 / 16

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not 0 < self.d <= 0.5:
            raise ValueError(f"d must lie in (0, 1/2], got {self.d}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def gamma_ratio(self):
        """gamma as an exact (numerator, denominator) pair."""
        f = Fraction(repr(float(self.gamma))).limit_denominator(1 << 20)
        return f.numerator, f.denominator

    def to_dict(self):
        return {"c": self.c, "d": self.d, "gamma": self.gamma}


def reset_due(empty_seen, seen, params):
    """True once at least a gamma fraction of counted data slots were empty."""
    num, den = params.gamma_ratio
    return seen >= 1 and empty_seen * den >= num * seen


@dataclass(frozen=True)
class PacketState:
    id: int
    arrival_slot: int = 0
    activity: Activity = Activity.INACTIVE
    age: int = 1
    empty_data_seen: int = 0
    data_slots_seen: int = 0
    resets: int = 0
    attempts_control: int = 0
    attempts_data: int = 0
    activated_at: int | None = None

    @property
    def attempts(self):
        return self.attempts_control + self.attempts_data


@dataclass(frozen=True)
class SingleChannelPhase:
    phase: Phase = Phase.CONTROL
    last_control_empty: bool = False
    pending_termination: bool = False
    consecutive_empty_seen: int = 0
    first_slot: bool = False


@dataclass(frozen=True)
class TransmitDecision:
    send_control: bool = False
    send_data: bool = False

    @property
    def any(self):
        return self.send_control or self.send_data


def transmit_probabilities(age, params):
    """(control, data) send probabilities for a packet of the given age."""
    if age < 1:
        raise ValueError(f"age must be >= 1, got {age}")
    p_control = min(1.0, params.c * max(math.log(age), 1.0) / age)
    p_data = min(1.0, params.d / age)
    return p_control, p_data


def _activate(state, slot):
    return replace(
        state,
        activity=Activity.ACTIVE,
        age=1,
        empty_data_seen=0,
        data_slots_seen=0,
        activated_at=None if slot is None else slot + 1,
    )


def _count_data_slot(state, data_view, params):
    """Count one data observation; reset or age the packet."""
    seen = state.data_slots_seen + 1
    empty = state.empty_data_seen + (data_view == ListenerView.EMPTY)
    if reset_due(empty, seen, params):
        return replace(
            state,
            activity=Activity.INACTIVE,
            empty_data_seen=empty,
            data_slots_seen=seen,
            resets=state.resets + 1,
        )
    return replace(state, empty_data_seen=empty, data_slots_seen=seen, age=state.age + 1)


# -- two channels ------------------------------------------------------------


def rb2_decide(state, params, draws):
    """Transmit decision of an active packet given two uniform draws.

    Returns ``(decision, state)`` with the attempt counters already bumped.
    """
    assert state.activity is Activity.ACTIVE, "only active packets decide"
    p_control, p_data = transmit_probabilities(state.age, params)
    decision = TransmitDecision(draws[0] < p_control, draws[1] < p_data)
    state = replace(
        state,
        attempts_control=state.attempts_control + decision.send_control,
        attempts_data=state.attempts_data + decision.send_data,
    )
    return decision, state


def rb2_observe(state, control_view, data_view, own_result=None, params=None, slot=None):
    """End-of-slot update from what the packet saw on both channels.

    ``own_result`` is given iff the packet sent on the data channel.
    """
    params = params or ProtocolParams()
    if state.activity is Activity.DONE:
        return state
    if state.activity is Activity.INACTIVE:
        if control_view == ListenerView.EMPTY:
            return _activate(state, slot)
        return state
    if own_result == TransmitterResult.SUCCEEDED:
        return replace(state, activity=Activity.DONE)
    return _count_data_slot(state, data_view, params)


# -- one channel -------------------------------------------------------------


def rb1_decide(state, phase, params, draw):
    """Whether the packet puts anything on the single channel this slot.

    Returns ``(transmit, state)``; the attempt counter matching the slot
    type is bumped when it transmits.
    """
    if state.activity is not Activity.ACTIVE:
        return False, state
    if phase.phase is Phase.CONTROL:
        p_control, _ = transmit_probabilities(state.age, params)
        send = phase.first_slot or draw < p_control
        if send:
            state = replace(state, attempts_control=state.attempts_control + 1)
        return send, state
    if phase.pending_termination:
        return False, state
    _, p_data = transmit_probabilities(state.age, params)
    send = draw < p_data
    if send:
        state = replace(state, attempts_data=state.attempts_data + 1)
    return send, state


def rb1_observe(state, phase, params, view, own_result=None, slot=None):
    """End-of-slot update for the single-channel variant.

    Returns ``(state, phase)``.  ``phase.phase`` after the call is what the
    packet will treat the next slot as.
    """
    if state.activity is Activity.DONE:
        return state, phase
    if state.activity is Activity.INACTIVE:
        run = phase.consecutive_empty_seen + 1 if view == ListenerView.EMPTY else 0
        if run >= 2:
            return _activate(state, slot), SingleChannelPhase(Phase.CONTROL, first_slot=True)
        return state, replace(phase, consecutive_empty_seen=run)

    succeeded = own_result == TransmitterResult.SUCCEEDED
    if phase.phase is Phase.CONTROL:
        assert not succeeded, "control signals carry no message"
        return state, replace(
            phase,
            phase=Phase.DATA,
            last_control_empty=view == ListenerView.EMPTY,
            first_slot=False,
        )

    if phase.phase is Phase.DATA:
        if succeeded:
            if phase.last_control_empty:
                return state, replace(phase, phase=Phase.EXTRA, pending_termination=True)
            return replace(state, activity=Activity.DONE), phase
        if phase.last_control_empty and view == ListenerView.FULL:
            return state, replace(phase, phase=Phase.EXTRA)
    else:
        assert phase.phase is Phase.EXTRA
        if phase.pending_termination or succeeded:
            return replace(state, activity=Activity.DONE), replace(phase, pending_termination=False)

    state = _count_data_slot(state, view, params)
    if state.activity is Activity.INACTIVE:
        return state, SingleChannelPhase()
    return state, replace(phase, phase=Phase.CONTROL, last_control_empty=False)


def rb1_step(state, phase, params, draw, view, own_result=None, slot=None):
    """Decide and observe one slot in one call (for hand-stepped executions).

    ``view`` is what the channel looked like; if the packet transmitted and
    no result is supplied, the transmission is taken to have failed.
    """
    sent, state = rb1_decide(state, phase, params, draw)
    if sent:
        assert view == ListenerView.FULL, "a slot with a transmission cannot look empty"
        if own_result is None:
            own_result = TransmitterResult.FAILED
    else:
        own_result = None
    state, phase = rb1_observe(state, phase, params, view, own_result, slot)
    return state, phase, sent


# -- binary exponential backoff ---------------------------------------------


@dataclass(frozen=True)
class BebState:
    window: int = 2
    chosen: int = 0
    position: int = 0
    window_index: int = 0
    attempts: int = 0
    done: bool = False


def beb_init(draw, window=2):
    return BebState(window=window, chosen=min(int(draw * window), window - 1))


def beb_decide(state):
    return not state.done and state.position == state.chosen


def beb_step(state, draw, own_result=None):
    """Advance one slot.

    Returns ``(state, decision)`` where the decision is what the packet did
    in the slot just finished.  ``draw`` is consumed only when a new window
    opens.
    """
    send = beb_decide(state)
    decision = TransmitDecision(send_data=send)
    if state.done:
        return state, decision
    attempts = state.attempts + send
    if send and own_result == TransmitterResult.SUCCEEDED:
        return replace(state, attempts=attempts, done=True), decision
    position = state.position + 1
    if position < state.window:
        return replace(state, attempts=attempts, position=position), decision
    window = 2 * state.window
    return (
        BebState(
            window=window,
            chosen=min(int(draw * window), window - 1),
            position=0,
            window_index=state.window_index + 1,
            attempts=attempts,
        ),
        decision,
    )
