"""
A burst on top of a steady stream: Re-Backoff against binary exponential backoff
================================================================================

One packet arrives every `period` slots and a burst of 512 lands at slot
1000.  BEB packets that lost during the burst sit on huge windows; Re-Backoff
packets reset once the data channel goes quiet and pick up the slack.
"""
from rebackoff import RunConfig, run
from rebackoff.analysis import interval_metrics

horizon = 30_000
for period in (5, 3):
    adv = {"kind": "stream_burst", "period": period, "burst_size": 512, "burst_slot": 1000}
    print(f"arrival rate 1/{period}, horizon {horizon}")
    for protocol in ("rebackoff2", "beb"):
        tr = run(RunConfig(protocol=protocol, adversary=adv, seed=1, stop="max_slots", max_slots=horizon))
        w = interval_metrics(tr, 1000, horizon)
        print(f"  {protocol:>10}: backlog at horizon {tr.live_at_end:>5}, "
              f"post-burst throughput {w.throughput:.3f}, resets {tr.resets.sum()}")
