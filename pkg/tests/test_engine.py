import numpy as np
import pytest

from rebackoff._rng import derive_key, uniform
from rebackoff.adversary import ConfigError
from rebackoff.channel import ListenerView, TransmitterResult
from rebackoff.engine import AdversaryContractError, RunConfig, World, run, run_reference
from rebackoff.protocols import Activity, PacketState, ProtocolParams, rb2_decide, rb2_observe
from rebackoff.trace import ACTIVATION, RESET, SUCCESS

PACKET_FIELDS = ("arrival", "success", "resets", "attempts_control", "attempts_data")

SCENARIOS = [
    {"kind": "batch", "n": 60},
    {"kind": "composite", "parts": [
        {"kind": "batch", "n": 40},
        {"kind": "window_jammer", "intervals": [[0, 1]], "period": 7, "until": 400}]},
    {"kind": "stream_burst", "period": 3, "burst_size": 50, "burst_slot": 100, "until": 600},
    {"kind": "poisson", "rate": 0.2, "until": 500},
    {"kind": "composite", "parts": [{"kind": "batch", "n": 15}, {"kind": "spoof_jammer", "stop_age": 8, "start": 3}]},
    {"kind": "composite", "parts": [{"kind": "batch", "n": 15}, {"kind": "spoof_jammer", "spoof_length": 50}]},
]


def assert_same_trace(a, b):
    assert a.slots == b.slots
    for name in a.columns:
        if name == "contention":
            # per-slot sums run over packets in different orders
            np.testing.assert_allclose(a.contention, b.contention, rtol=1e-12, atol=0)
        else:
            np.testing.assert_array_equal(a.columns[name], b.columns[name], err_msg=name)
    np.testing.assert_array_equal(a.events, b.events)
    for f in PACKET_FIELDS:
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f), err_msg=f)


@pytest.mark.parametrize("protocol", ["rebackoff2", "beb"])
@pytest.mark.parametrize("adv", SCENARIOS)
def test_kernels_match_reference(protocol, adv):
    for seed in range(2):
        cfg = RunConfig(protocol=protocol, adversary=adv, seed=seed)
        assert_same_trace(run(cfg), run_reference(cfg))


def test_kernel_matches_reference_with_max_slots_cut():
    cfg = RunConfig(adversary={"kind": "stream_burst", "period": 4, "burst_size": 30, "burst_slot": 10},
                    stop="max_slots", max_slots=5000, seed=3)
    assert_same_trace(run(cfg), run_reference(cfg))


def test_single_packet_matches_hand_stepping():
    cfg = RunConfig(adversary={"kind": "batch", "n": 1}, seed=21)
    tr = run(cfg)
    key = derive_key(21)
    params = ProtocolParams()
    st = PacketState(id=0)
    t = 0
    while st.activity is not Activity.DONE:
        ctrl = data = False
        result = None
        if st.activity is Activity.ACTIVE:
            dec, st = rb2_decide(st, params, (uniform(key, 0, t, 0), uniform(key, 0, t, 1)))
            ctrl, data = dec.send_control, dec.send_data
            result = TransmitterResult.SUCCEEDED if data else None
        view = lambda busy: ListenerView.FULL if busy else ListenerView.EMPTY
        st = rb2_observe(st, view(ctrl), view(data), result, params, slot=t)
        t += 1
    assert tr.success[0] == t - 1
    assert tr.makespan == t - 1
    # activation happens in slot 1, after the empty control slot 0
    assert tr.events[0].tolist() == [1, 0, ACTIVATION]
    assert tr.attempts_control[0] == st.attempts_control
    assert tr.attempts_data[0] == st.attempts_data


def test_determinism():
    cfg = RunConfig(adversary={"kind": "batch", "n": 100}, seed=5, verbosity="per_packet")
    a, b = run(cfg), run(cfg)
    assert list(a.to_lines()) == list(b.to_lines())


def test_empty_system():
    tr = run(RunConfig(adversary={"kind": "batch", "n": 0}, stop="max_slots", max_slots=100))
    assert tr.slots == 100
    assert tr.system_empty.all() and (tr.contention == 0).all()


def test_empty_batch_all_done_finishes_at_once():
    tr = run(RunConfig(adversary={"kind": "batch", "n": 0}))
    assert tr.slots == 0 and tr.complete


@pytest.mark.parametrize("protocol", ["rebackoff2", "rebackoff1", "beb"])
def test_conservation_and_ledger(protocol):
    cfg = RunConfig(protocol=protocol, adversary={"kind": "stream_burst", "period": 6, "burst_size": 12,
                                                  "burst_slot": 20}, stop="max_slots", max_slots=1500,
                    seed=1, verbosity="per_packet")
    tr = run(cfg)
    assert tr.arrivals.sum() == tr.successes.sum() + tr.live_at_end
    assert tr.successes.sum() == (tr.success >= 0).sum()
    rebuilt = tr.rebuild_ledger()
    stored = tr.ledger()
    assert [(r.id, r.arrival, r.activations, r.resets, r.success) for r in rebuilt] == \
        [(r.id, r.arrival, r.activations, r.resets, r.success) for r in stored]
    # a success event for every delivered packet, in the winner column too
    succ = tr.events[tr.events[:, 2] == SUCCESS]
    assert sorted(succ[:, 1].tolist()) == sorted(np.flatnonzero(tr.success >= 0).tolist())
    if protocol != "rebackoff1":
        assert (tr.winner[succ[:, 0]] == succ[:, 1]).all()
    for r in (stored if protocol != "beb" else ()):
        # each activation ends in a reset, a success, or is still open at the end
        assert len(r.activations) - 1 <= len(r.resets) <= len(r.activations)
        if r.success is not None:
            assert len(r.resets) == len(r.activations) - 1


def test_activation_recorded_in_first_active_slot():
    tr = run(RunConfig(adversary={"kind": "batch", "n": 5}, seed=0))
    act = tr.events[tr.events[:, 2] == ACTIVATION]
    # all five arrive at 0, observe the empty control slot 0 and act from slot 1
    assert (act[:5, 0] == 1).all()
    assert tr.active_count[0] == 0 and tr.active_count[1] == 5


def test_resets_counted():
    tr = run(RunConfig(adversary={"kind": "batch", "n": 200}, seed=2))
    assert tr.resets.sum() == (tr.events[:, 2] == RESET).sum() > 0


def test_contention_matches_ages():
    tr = run(RunConfig(adversary={"kind": "batch", "n": 30}, seed=4))
    lt = tr.lifetime_array()
    for t in range(0, tr.slots, 37):
        m = (lt[:, 1] <= t) & (lt[:, 2] >= t)
        ages = t - lt[m, 1] + 1
        assert tr.contention[t] == pytest.approx((1.0 / ages).sum(), rel=1e-12)
        assert tr.active_count[t] == m.sum()


def test_disrupted_control_blocks_activation():
    adv = {"kind": "composite", "parts": [{"kind": "batch", "n": 3},
                                          {"kind": "window_jammer", "intervals": [[0, 10]], "channel": "control"}]}
    tr = run(RunConfig(adversary=adv, seed=0))
    act = tr.events[tr.events[:, 2] == ACTIVATION]
    assert act[0, 0] == 11


def test_all_done_needs_finite_adversary():
    with pytest.raises(ConfigError):
        run(RunConfig(adversary={"kind": "poisson", "rate": 0.1}))


def test_incomplete_run_flagged():
    tr = run(RunConfig(adversary={"kind": "batch", "n": 50}, max_slots=20))
    assert not tr.complete and tr.slots == 20 and tr.live_at_end > 0


def test_packet_streams_are_isolated():
    """Extra arrivals later in the run do not change what earlier packets draw."""
    base = RunConfig(adversary={"kind": "batch", "n": 1}, seed=8, verbosity="per_packet")
    more = base.with_(adversary={"kind": "composite", "parts": [
        {"kind": "batch", "n": 1}, {"kind": "batch", "n": 3, "slot": 10_000_000}]},
        stop="max_slots", max_slots=50)
    a, b = run(base), run(more)
    t = int(a.success[0])
    assert t < 50 and b.success[0] == t


def test_contract_violation_on_overinjection():
    class Liar:
        kind = "liar"
        total = 1
        last_arrival_slot = 0
        oblivious = True

        def next(self, slot, history=None):
            from rebackoff.adversary import AdversaryDirective
            return AdversaryDirective(2 if slot == 0 else 0)

    w = World(RunConfig())
    w.adversary = Liar()
    with pytest.raises(AdversaryContractError):
        w.step()


def test_rebackoff1_records_designations():
    tr = run(RunConfig(protocol="rebackoff1", adversary={"kind": "batch", "n": 6}, seed=3,
                       verbosity="per_packet"))
    assert tr.complete and tr.live_at_end == 0
    assert set(np.unique(tr.designation)) <= {0, 1, 2, 3}
    assert len(tr.designations) == tr.slots
