import math
from types import SimpleNamespace

import numpy as np
import pytest

from rebackoff.analysis import (
    attempts_stats,
    check_prefix_fullness,
    check_slot_bounds,
    check_sync_agreement,
    check_trial_prefixes,
    contention,
    exact_slot_probabilities,
    interval_metrics,
    metrics_from_counts,
    prefix_violations,
    prefixes_ok,
    reset_stats,
    run_metrics,
    segment_epochs,
    sigma,
    sigma_oracle,
    slot_bounds,
)
from rebackoff.engine import RunConfig, run
from rebackoff.trace import ACTIVATION, RESET, SUCCESS

from conftest import synthetic_trace


# -- contention and sigma ----------------------------------------------------


def test_contention():
    assert contention([1, 2, 4]) == 1.75
    assert contention([]) == 0.0


@pytest.mark.parametrize("ages, expected", [
    ([5], 5),
    ([2, 2, 2, 2], 2),
    ([1, 2], 1),  # 1 carries 2/3 of the contention
    ([2, 2, 4, 4], 2),  # young side exactly half
    ([1, 3, 3, 3], 1),  # exact tie: 1 == 3 * 1/3
    ([10, 10, 10, 1000], 10),
    ([3, 6, 6, 6, 6], 6),
])
def test_sigma_examples(ages, expected):
    assert sigma(ages) == expected
    assert sigma_oracle(ages) == expected


def test_sigma_halves_hold():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a = rng.integers(1, 50, rng.integers(1, 30))
        s = sigma(a)
        inv = 1 / a
        half = inv.sum() / 2 - 1e-12
        assert inv[a <= s].sum() >= half and inv[a >= s].sum() >= half
        # no smaller age in the multiset works
        for c in np.unique(a[a < s]):
            assert not (inv[a <= c].sum() >= half and inv[a >= c].sum() >= half)


def test_sigma_rejects_empty():
    with pytest.raises(ValueError):
        sigma([])
    with pytest.raises(ValueError):
        sigma_oracle([])


# -- throughput and waste ----------------------------------------------------


def test_metrics_from_counts():
    m = metrics_from_counts(10, 3, 2)
    assert (m.throughput, m.non_waste, m.waste) == (0.3, 0.5, 0.5)
    empty = metrics_from_counts(0, 0, 0)
    assert not empty.defined and empty.throughput is None and empty.waste is None


def test_all_disrupted_interval():
    tr = synthetic_trace(6, disrupt_data=True, live_count=3)
    m = interval_metrics(tr)
    assert m.throughput == 0 and m.non_waste == 1 and m.waste == 0


def test_interval_skips_empty_slots():
    succ = np.array([0, 1, 0, 0, 1, 0])
    empty = np.array([True, False, False, True, False, True])
    tr = synthetic_trace(6, successes=succ, system_empty=empty)
    m = interval_metrics(tr)
    assert m.slots == 3 and m.successes == 2 and m.throughput == pytest.approx(2 / 3)
    part = interval_metrics(tr, 0, 2)
    assert part.slots == 1 and part.throughput == 1.0
    assert interval_metrics(tr, 5, 6).throughput is None


def test_run_metrics_stop_at_makespan():
    tr = run(RunConfig(adversary={"kind": "batch", "n": 30}, seed=2))
    m = run_metrics(tr)
    assert m.successes == 30 and m.end == tr.makespan + 1
    assert m.throughput == pytest.approx(30 / (tr.makespan + 1))


def test_attempt_stats():
    tr = run(RunConfig(adversary={"kind": "batch", "n": 20}, seed=3))
    st = attempts_stats(tr)
    assert st.mean == pytest.approx((tr.attempts_control + tr.attempts_data).mean())
    assert (st.attempts >= 1).all()


# -- segmentation ------------------------------------------------------------


def test_unit_epoch_for_small_contention():
    ev = [(0, p, ACTIVATION) for p in range(3)]
    x = np.array([3.0, 1.5, 1.0, 0.75])
    tr = synthetic_trace(4, events=ev, n_packets=3, contention=x, active_count=3)
    segs = segment_epochs(tr)
    assert [(s.kind, s.start, s.end) for s in segs] == [("unit_epoch", 0, 1), ("interstitial", 1, 4)]
    assert segs[0].start_contention == 3.0


def test_epoch_streaks_follow_sigma():
    n = 32
    ev = [(0, p, ACTIVATION) for p in range(n)]
    x = n / np.arange(1, 11)
    tr = synthetic_trace(10, events=ev, n_packets=n, contention=x, active_count=n)
    segs = segment_epochs(tr)
    assert [(s.kind, s.start, s.end) for s in segs] == [("epoch", 0, 7), ("interstitial", 7, 10)]
    # at slot 1 every age is 2 and X = 16, so that streak lasts sigma = 2 slots;
    # at slot 3 X = 8 still meets the threshold, at slot 7 X = 4 does not
    assert segs[0].streaks == [(0, 1, 1), (1, 3, 2), (3, 7, 4)]


def test_activation_cuts_interstitial_and_epoch():
    ev = [(0, 0, ACTIVATION), (3, 1, ACTIVATION)]
    empty = np.array([False] * 5 + [True, True])
    tr = synthetic_trace(7, events=ev, n_packets=2, contention=1.0, system_empty=empty)
    segs = segment_epochs(tr)
    assert [(s.kind, s.start, s.end) for s in segs] == [
        ("unit_epoch", 0, 1), ("interstitial", 1, 3), ("unit_epoch", 3, 4), ("interstitial", 4, 5)]


def test_segment_disruption_flag():
    ev = [(0, 0, ACTIVATION)]
    dis = np.array([False, True, False, False, False, True, False, False, False])
    tr = synthetic_trace(9, events=ev, n_packets=1, contention=1.0, disrupt_data=dis)
    segs = segment_epochs(tr)
    assert segs[1].kind == "interstitial" and segs[1].disrupted  # 2 of 8
    tr = synthetic_trace(9, events=ev, n_packets=1, contention=1.0, disrupt_data=dis & (np.arange(9) < 3))
    assert not segment_epochs(tr)[1].disrupted  # 1 of 8


@pytest.mark.parametrize("protocol", ["rebackoff2", "rebackoff1"])
def test_segments_partition_real_runs(protocol):
    adv = {"kind": "composite", "parts": [
        {"kind": "batch", "n": 40}, {"kind": "batch", "n": 10, "slot": 300}]}
    tr = run(RunConfig(protocol=protocol, adversary=adv, seed=5, verbosity="per_packet"))
    segs = segment_epochs(tr)
    # single-channel streaks are measured in slot-groups of at most 3 slots
    width = 3 if protocol == "rebackoff1" else 1
    covered = np.zeros(tr.slots, dtype=int)
    for s in segs:
        covered[s.start: s.end] += 1
        for a, b, sig in s.streaks:
            assert s.start <= a < b <= s.end and b - a <= sig * width
    assert covered.max() == 1
    assert not covered[~tr.system_empty].size or covered[~tr.system_empty].min() == 1
    assert [s.start for s in segs] == sorted(s.start for s in segs)


# -- reset statistics ----------------------------------------------------------


def test_reset_stats_example():
    tr = SimpleNamespace(resets=np.array([0, 0, 1, 2]))
    st = reset_stats(tr)
    assert st.histogram == {0: 2, 1: 1, 2: 1}
    assert st.tail == {0: (0.5, 4), 1: (0.5, 2), 2: (0.0, 1)}
    both = reset_stats([tr, SimpleNamespace(resets=np.array([1]))])
    assert both.histogram == {0: 2, 1: 2, 2: 1}


# -- slot probability bounds -----------------------------------------------------


def test_exact_probabilities():
    p = exact_slot_probabilities([2], 0.5)
    assert p == {"success": 0.25, "busy": 0.25, "collision": 0.0}
    p = exact_slot_probabilities([1, 1], 0.5)
    assert p["success"] == 0.5 and p["busy"] == 0.75 and p["collision"] == 0.25


def test_bounds_hold_exactly_for_small_sets():
    for ages in ([1], [2], [1, 1], [2, 4, 8], [1] * 8, [3, 3, 7]):
        x, p = contention(ages), exact_slot_probabilities(ages, 0.5)
        b = slot_bounds(x, 0.5)
        assert p["success"] >= b["success_min"]
        assert b["busy_min"] <= p["busy"] <= b["busy_max"] + 1e-15
        assert p["collision"] <= b["collision_max"]


def test_check_slot_bounds():
    r = check_slot_bounds([2], trials=20_000, seed=1)
    assert r.passed and r.exact["success"] == 0.25
    assert abs(r.estimates["success"] - 0.25) < 5 * r.standard_errors["success"]
    empty = check_slot_bounds([], trials=1000)
    assert empty.estimates["busy"] == 0 and empty.contention == 0 and empty.passed


def test_prefixes_ok():
    assert prefixes_ok([1, 0, 0, 0, 0], 0.8)
    assert not prefixes_ok([0, 1], 0.8)
    assert list(prefixes_ok(np.array([[1, 1], [0, 0]]), 1.0)) == [True, False]


def test_trial_prefixes_certain_success():
    r = check_trial_prefixes(1.0, 64, trials=100)
    assert r.forced == 16 and r.fraction == 1.0 and r.passed
    with pytest.raises(ValueError):
        check_trial_prefixes(0.1, 100)


# -- prefix fullness and synchronization -------------------------------------------


def test_prefix_violations_boundary():
    assert prefix_violations([True] + [False] * 15) == []
    assert prefix_violations([True] + [False] * 16) == [17]
    assert prefix_violations([False]) == []
    assert prefix_violations([False, False]) == [2]


def test_prefix_checker_flags_missing_reset():
    # a packet active for 20 silent data slots should have reset long ago
    tr = synthetic_trace(20, events=[(0, 0, ACTIVATION)], n_packets=1)
    found = check_prefix_fullness(tr)
    assert found[0] == (0, 0, 2) and len(found) == 19
    assert check_prefix_fullness(tr, limit=3) == found[:3]
    ok = synthetic_trace(20, events=[(0, 0, ACTIVATION)], n_packets=1, data_tx=1)
    assert check_prefix_fullness(ok) == []


@pytest.mark.parametrize("protocol", ["rebackoff2", "rebackoff1"])
def test_prefix_checker_clean_on_runs(protocol):
    adv = {"kind": "composite", "parts": [
        {"kind": "batch", "n": 50},
        {"kind": "window_jammer", "intervals": [[0, 2]], "period": 9, "until": 500}]}
    tr = run(RunConfig(protocol=protocol, adversary=adv, seed=8, verbosity="per_packet"))
    assert tr.resets.sum() > 0
    assert check_prefix_fullness(tr) == []


def test_sync_checker_flags_disagreement():
    des = [{0: "control", 1: "control"}, {0: "control", 1: "data"}, {0: "data", 2: "control"}]
    found = check_sync_agreement(SimpleNamespace(designations=des))
    assert found == [(1, {0: "control", 1: "data"})]
    with pytest.raises(ValueError):
        check_sync_agreement(SimpleNamespace(designations=None))


def test_sync_clean_on_run():
    adv = {"kind": "composite", "parts": [
        {"kind": "batch", "n": 6}, {"kind": "batch", "n": 3, "slot": 17},
        {"kind": "window_jammer", "intervals": [[5, 9], [30, 33]], "channel": "control"}]}
    tr = run(RunConfig(protocol="rebackoff1", adversary=adv, seed=1, verbosity="per_packet"))
    assert check_sync_agreement(tr) == []
