"""Batch execution helpers: run many configs and keep small summaries.

Traces of large runs are tens of megabytes, so sweeps reduce each run to a
flat summary dict right after it finishes (optionally in a worker process).
"""
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analysis import check_prefix_fullness, interval_metrics, run_metrics
from .engine import RunConfig, run


def summarize(trace, window=None, prefix_check=True):
    """Reduce a trace to the numbers the sweeps and suites aggregate.

    ``window`` is an optional (start, end) slot range for extra windowed
    metrics (``window_lambda`` and friends).
    """
    m = run_metrics(trace)
    n = trace.n_packets
    attempts = trace.attempts_control + trace.attempts_data
    out = {
        "protocol": trace.protocol,
        "seed": trace.config.seed,
        "packets": n,
        "slots": trace.slots,
        "complete": bool(trace.complete),
        "makespan": m.makespan,
        "N": m.successes,
        "D": m.disrupted,
        "lambda": m.throughput,
        "Lambda": m.non_waste,
        "waste": m.waste,
        "mean_attempts": float(attempts.mean()) if n else 0.0,
        "mean_resets": float(trace.resets.mean()) if n else 0.0,
        "reset_hist": np.bincount(trace.resets).tolist() if n else [],
        "backlog": trace.live_at_end,
    }
    out["attempts_per_ln2n"] = out["mean_attempts"] / math.log(n) ** 2 if n > 1 else None
    if window is not None:
        w = interval_metrics(trace, *window)
        out.update(window_lambda=w.throughput, window_Lambda=w.non_waste, window_N=w.successes)
    if prefix_check:
        out["prefix_violations"] = len(check_prefix_fullness(trace))
    return out


def run_summary(config, window=None, prefix_check=True):
    """Run a config (RunConfig or its dict form) and summarize it."""
    if isinstance(config, dict):
        config = RunConfig.from_dict(config)
    return summarize(run(config), window, prefix_check)


def _star(args):
    return run_summary(*args)


def map_runs(configs, jobs=1, window=None, prefix_check=True):
    """Summaries for every config, in input order."""
    tasks = [(c.to_dict() if isinstance(c, RunConfig) else c, window, prefix_check) for c in configs]
    if jobs <= 1 or len(tasks) <= 1:
        return [_star(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star, tasks, chunksize=1))


AGGREGATES = ("mean", "median", "p90")


def aggregate(values, how="median"):
    vals = np.array([v for v in values if v is not None], dtype=float)
    if len(vals) == 0:
        return None
    if how == "mean":
        return float(vals.mean())
    if how == "median":
        return float(np.median(vals))
    if how.startswith("p"):
        return float(np.percentile(vals, float(how[1:])))
    raise ValueError(f"unknown aggregate {how!r}")


def pooled_tail_ratios(summaries):
    """P(resets >= k+1) / P(resets >= k) over the packets of many runs,
    with the number of packets having >= k resets."""
    width = max((len(s["reset_hist"]) for s in summaries), default=0)
    hist = np.zeros(width, dtype=np.int64)
    for s in summaries:
        hist[: len(s["reset_hist"])] += s["reset_hist"]
    at_least = np.cumsum(hist[::-1])[::-1]
    return {
        k: (float(at_least[k + 1] / at_least[k]) if k + 1 < width else 0.0, int(at_least[k]))
        for k in range(width)
        if at_least[k]
    }
