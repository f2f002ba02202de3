"""
Epochs, streaks and the young/old split
=======================================

Every activation opens an epoch.  While contention stays above the unit
threshold the epoch is cut into streaks whose length is sigma, the age
that splits the active packets' contention into a young and an old half.
"""
import numpy as np

from rebackoff import RunConfig, run, segment_epochs, sigma

print("sigma of a few age multisets")
for ages in ([1, 2], [2, 2, 4, 4], [3, 6, 6, 6, 6], [1, 100, 100, 100, 100, 100]):
    print(f"  {ages} -> {sigma(ages)}")

adv = {"kind": "composite", "parts": [
    {"kind": "batch", "n": 200},
    {"kind": "batch", "n": 30, "slot": 2500}]}
tr = run(RunConfig(adversary=adv, seed=3, verbosity="per_packet"))
segs = segment_epochs(tr)
kinds = [s.kind for s in segs]
print(f"\n{tr.slots} slots, {len(segs)} segments: "
      + ", ".join(f"{k} {kinds.count(k)}" for k in ("epoch", "unit_epoch", "interstitial")))

for s in [s for s in segs if s.kind == "epoch"][:3]:
    lengths = [b - a for a, b, _ in s.streaks]
    print(f"epoch [{s.start}, {s.end}) X0={s.start_contention:.1f}: "
          f"{len(s.streaks)} streaks, sigma {[sg for *_, sg in s.streaks][:8]}..., "
          f"mean length {np.mean(lengths):.1f}")
