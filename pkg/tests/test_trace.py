import json

import numpy as np
import pytest

from rebackoff.engine import RunConfig, run
from rebackoff.trace import read_trace_lines

ADV = {"kind": "composite", "parts": [
    {"kind": "batch", "n": 12},
    {"kind": "window_jammer", "intervals": [[3, 5]], "channel": "both"}]}


@pytest.fixture(scope="module", params=["rebackoff2", "rebackoff1", "beb"])
def trace(request):
    return run(RunConfig(protocol=request.param, adversary=ADV, seed=4, verbosity="per_packet"))


def test_round_trip(trace, tmp_path):
    path = tmp_path / "t.jsonl"
    trace.write(path)
    header, slots, packets = read_trace_lines(path)
    assert header["config"] == trace.config.to_dict()
    assert header["slots"] == trace.slots == len(slots)
    assert header["packets"] == trace.n_packets == len(packets)
    assert slots == [json.loads(json.dumps(r.to_dict())) for r in trace]
    assert packets == [p.to_dict() for p in trace.ledger()]
    # the stored config regenerates the same run
    again = run(RunConfig.from_dict(header["config"]))
    assert list(again.to_lines()) == list(trace.to_lines())


def test_slot_records(trace):
    rec = trace[4]
    assert rec.slot == 4
    assert rec.directive.disrupt_data and rec.directive.disrupt_control
    assert rec.data_outcome.disrupted
    assert trace[-1].slot == trace.slots - 1
    with pytest.raises(IndexError):
        trace[trace.slots]
    assert trace[0].directive.arrivals == 12
    if trace.protocol == "beb":
        assert rec.control_outcome is None
    if trace.protocol == "rebackoff1":
        assert rec.designation in ("idle", "control", "data", "extra")
        assert rec.designations is not None


def test_events_in_matches_event_array(trace):
    total = sum(len(trace.events_in(t)) for t in range(trace.slots))
    assert total == len(trace.events)


def test_makespan_and_backlog(trace):
    assert trace.live_at_end == 0
    assert trace.makespan == trace.success.max()
    assert trace.successes[trace.makespan] == 1


def test_summary_verbosity_has_no_events():
    tr = run(RunConfig(adversary={"kind": "batch", "n": 5}, seed=1))
    assert tr[0].events == ()
    assert not any('"type": "packet"' in line for line in tr.to_lines())
