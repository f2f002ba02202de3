import math

import pytest

from rebackoff.channel import ListenerView, TransmitterResult
from rebackoff.protocols import (
    Activity,
    BebState,
    PacketState,
    Phase,
    ProtocolParams,
    SingleChannelPhase,
    beb_init,
    beb_step,
    rb1_observe,
    rb1_step,
    rb2_decide,
    rb2_observe,
    reset_due,
    transmit_probabilities,
)

E, F = ListenerView.EMPTY, ListenerView.FULL
OK, FAIL = TransmitterResult.SUCCEEDED, TransmitterResult.FAILED


def active(age=1, **kw):
    return PacketState(id=0, activity=Activity.ACTIVE, age=age, **kw)


# -- parameters and probabilities --------------------------------------------


def test_defaults():
    p = ProtocolParams()
    assert (p.c, p.d, p.gamma) == (2.0, 0.5, 15 / 16)
    assert p.gamma_ratio == (15, 16)


@pytest.mark.parametrize("kw", [{"c": 0}, {"d": 0}, {"d": 0.6}, {"gamma": 1}, {"gamma": 0}])
def test_params_validated(kw):
    with pytest.raises(ValueError):
        ProtocolParams(**kw)


def test_probabilities_at_age_one_clamp():
    assert transmit_probabilities(1, ProtocolParams(c=2, d=0.5)) == (1.0, 0.5)
    assert transmit_probabilities(1, ProtocolParams(c=0.25, d=0.5)) == (0.25, 0.5)


def test_probabilities_at_e_squared():
    pc, pd = transmit_probabilities(math.e**2, ProtocolParams(c=1, d=0.5))
    # ln(e^2) = 2 exactly, so the control probability is 2/e^2
    assert pc == pytest.approx(2 * math.exp(-2), rel=1e-12)
    assert pd == pytest.approx(0.5 * math.exp(-2), rel=1e-12)


def test_age_zero_rejected():
    with pytest.raises(ValueError):
        transmit_probabilities(0, ProtocolParams())


# -- two channels --------------------------------------------------------------


def test_decide_young_packet_sends_on_both():
    dec, st = rb2_decide(active(1), ProtocolParams(c=2), (0.99, 0.49))
    assert dec.send_control and dec.send_data
    assert (st.attempts_control, st.attempts_data) == (1, 1)


def test_decide_age_four_sends_nothing():
    # p_control = 0.25 ln4 / 4 = 0.0866..., p_data = 0.125
    dec, st = rb2_decide(active(4), ProtocolParams(c=0.25), (0.99, 0.2))
    assert not dec.send_control and not dec.send_data
    assert st.attempts == 0


@pytest.mark.parametrize("age", [1, 2, 10, 1000])
def test_zero_draws_always_send(age):
    dec, _ = rb2_decide(active(age), ProtocolParams(), (0.0, 0.0))
    assert dec.send_control and dec.send_data


def test_decide_requires_active():
    with pytest.raises(AssertionError):
        rb2_decide(PacketState(id=0), ProtocolParams(), (0.1, 0.1))


def test_activation_after_empty_control():
    st = rb2_observe(PacketState(id=0), E, F, slot=4)
    assert st.activity is Activity.ACTIVE and st.age == 1 and st.activated_at == 5
    assert rb2_observe(PacketState(id=0), F, E).activity is Activity.INACTIVE


def test_reset_at_fifteen_of_sixteen():
    st = active(16, empty_data_seen=14, data_slots_seen=15)
    st = rb2_observe(st, F, E)
    assert (st.empty_data_seen, st.data_slots_seen) == (15, 16)
    assert st.activity is Activity.INACTIVE and st.resets == 1


def test_no_reset_below_threshold():
    st = rb2_observe(active(16, empty_data_seen=13, data_slots_seen=15), F, E)
    assert st.activity is Activity.ACTIVE and st.age == 17


def test_success_terminates():
    st = rb2_observe(active(3), F, F, own_result=OK)
    assert st.activity is Activity.DONE
    assert rb2_observe(st, E, E) is st


def test_reset_rule_is_exact():
    params = ProtocolParams()
    assert not reset_due(0, 0, params)
    assert reset_due(1, 1, params)
    assert not reset_due(14, 15, params)
    assert reset_due(15, 16, params)


# -- one channel ---------------------------------------------------------------


def test_activation_needs_two_empty_slots():
    p = ProtocolParams()
    st, ph = PacketState(id=0), SingleChannelPhase()
    st, ph, sent = rb1_step(st, ph, p, 0.5, E)
    assert st.activity is Activity.INACTIVE and not sent
    st, ph, sent = rb1_step(st, ph, p, 0.5, E)
    assert st.activity is Activity.ACTIVE and ph.phase is Phase.CONTROL and ph.first_slot
    # the first control slot is sent with probability one
    st, ph, sent = rb1_step(st, ph, p, 0.999999, F)
    assert sent and ph.phase is Phase.DATA


def test_full_slot_restarts_the_empty_run():
    p = ProtocolParams()
    st, ph = PacketState(id=0), SingleChannelPhase()
    for view in (E, F, E):
        st, ph, _ = rb1_step(st, ph, p, 0.5, view)
    assert st.activity is Activity.INACTIVE and ph.consecutive_empty_seen == 1


def test_empty_control_full_data_adds_extra_slot():
    p = ProtocolParams()
    st = active(3)
    ph = SingleChannelPhase(Phase.CONTROL)
    st, ph, _ = rb1_step(st, ph, p, 0.999, E)
    st, ph, _ = rb1_step(st, ph, p, 0.999, F)
    assert ph.phase is Phase.EXTRA
    # the extra slot is empty: one counted data slot, and it is empty
    st, ph, _ = rb1_step(st, ph, p, 0.999, E)
    assert (st.empty_data_seen, st.data_slots_seen) == (1, 1)


def test_extra_slot_full_counts_full():
    p = ProtocolParams()
    st = active(3, empty_data_seen=0, data_slots_seen=2)
    ph = SingleChannelPhase(Phase.CONTROL)
    for view in (E, F, F):
        st, ph, _ = rb1_step(st, ph, p, 0.999, view)
    assert (st.empty_data_seen, st.data_slots_seen) == (0, 3)
    assert ph.phase is Phase.CONTROL and st.age == 4


def test_delayed_termination_after_empty_control():
    p = ProtocolParams()
    st, ph = active(1), SingleChannelPhase(Phase.DATA, last_control_empty=True)
    st, ph = rb1_observe(st, ph, p, F, own_result=OK)
    assert ph.pending_termination and ph.phase is Phase.EXTRA
    assert st.activity is Activity.ACTIVE
    st, ph, sent = rb1_step(st, ph, p, 0.0, E)
    assert not sent and st.activity is Activity.DONE


def test_success_after_full_control_terminates_at_once():
    p = ProtocolParams()
    st, ph = active(2), SingleChannelPhase(Phase.DATA, last_control_empty=False)
    st, ph = rb1_observe(st, ph, p, F, own_result=OK)
    assert st.activity is Activity.DONE


# -- binary exponential backoff -----------------------------------------------


def test_beb_happy_path():
    st = beb_init(0.1)
    assert (st.window, st.chosen) == (2, 0)
    st, dec = beb_step(st, 0.7, OK)
    assert dec.send_data and st.done and st.attempts == 1


def test_beb_windows_double_and_one_send_per_window():
    st = beb_init(0.0)
    sends = []
    for k in range(1, 5):
        for _ in range(st.window):
            st, dec = beb_step(st, 0.0, FAIL if beb_decide_now(st) else None)
            sends.append(dec.send_data)
        assert st.window == 2 ** (k + 1)
    assert sum(sends) == 4


def beb_decide_now(st):
    return st.position == st.chosen


def test_beb_waits_after_failure():
    st = BebState(window=8, chosen=2)
    seq = []
    for _ in range(8):
        st, dec = beb_step(st, 0.5, FAIL if st.position == st.chosen else None)
        seq.append(dec.send_data)
    assert seq == [False, False, True, False, False, False, False, False]
    assert st.window == 16 and st.chosen == 8
