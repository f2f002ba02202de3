"""
Batch arrivals: makespan and access attempts
============================================

n packets arrive together at slot 0 and nobody jams.  The makespan should
grow linearly in n and the attempts per packet like a polylog of n.
"""
import math

import numpy as np

from rebackoff import RunConfig, run, run_metrics

seeds = range(5)
print(f"{'n':>6} {'makespan':>9} {'makespan/n':>11} {'attempts':>9} {'att/ln^2 n':>11} {'waste':>6}")
for n in (64, 128, 256, 512, 1024):
    spans, attempts, wastes = [], [], []
    for s in seeds:
        tr = run(RunConfig(adversary={"kind": "batch", "n": n}, seed=s))
        spans.append(tr.makespan + 1)
        attempts.append((tr.attempts_control + tr.attempts_data).mean())
        wastes.append(run_metrics(tr).waste)
    m, a = np.median(spans), np.mean(attempts)
    print(f"{n:>6} {m:>9.0f} {m / n:>11.2f} {a:>9.1f} {a / math.log(n) ** 2:>11.2f} {np.mean(wastes):>6.3f}")

# the same batch under a jammer that hits one slot in ten for a while
n = 256
adv = {"kind": "composite", "parts": [
    {"kind": "batch", "n": n},
    {"kind": "window_jammer", "intervals": [[0, 1]], "period": 10, "until": 24 * n}]}
tr = run(RunConfig(adversary=adv, seed=0))
m = run_metrics(tr)
print(f"\njammed n={n}: makespan {tr.makespan + 1}, disrupted data slots {m.disrupted}, "
      f"throughput {m.throughput:.4f}")
