"""
One channel instead of two
==========================

Without a separate control channel, packets take turns designating slots as
control or data.  Every packet that has been around for two consecutive
slots must agree on which kind of slot comes next, even when the adversary
jams some of the control slots.
"""
from collections import Counter

from rebackoff import RunConfig, check_prefix_fullness, check_sync_agreement, run, run_metrics

adv = {"kind": "composite", "parts": [
    {"kind": "batch", "n": 40},
    {"kind": "batch", "n": 10, "slot": 150},
    {"kind": "window_jammer", "intervals": [[20, 30], [160, 175]], "channel": "control"}]}
tr = run(RunConfig(protocol="rebackoff1", adversary=adv, seed=2, verbosity="per_packet"))

print(f"{tr.n_packets} packets delivered in {tr.makespan + 1} slots")
print("slot designations:", dict(Counter(r.designation for r in tr)))
print("first slots:", " ".join((r.designation or "-")[0] for r in list(tr)[:60]))
print("designation disagreements:", len(check_sync_agreement(tr)))
print("prefix fullness violations:", len(check_prefix_fullness(tr)))
m = run_metrics(tr)
print(f"throughput {m.throughput:.3f}, waste {m.waste:.3f}")
