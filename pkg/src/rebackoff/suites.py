"""Verification batteries behind ``rebackoff verify``.

Each suite returns a list of Verdict objects, one per checked criterion.
The heavy simulation suites (scaling, beb-contrast) also report how many
prefix-fullness violations their traces contained, which the prefix suite
sums up.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    check_slot_bounds,
    check_sync_agreement,
    check_trial_prefixes,
    sigma,
    sigma_oracle,
)
from .badborrower import GameParams, borrowed_means, Doubling, play_infinite
from .engine import RunConfig, run
from .experiments import aggregate, map_runs, pooled_tail_ratios

SUITES = ("bounds", "sigma", "sync", "prefix", "borrower", "scaling", "beb-contrast")

BATCH_SIZES = (64, 128, 256, 512, 1024, 2048, 4096)
JAM_SIZES = (256, 1024)
# jam one slot in ten until slot JAM_SPAN * n, so disruption stays O(n)
JAM_SPAN = 24


@dataclass
class Verdict:
    criterion: int
    name: str
    passed: bool
    detail: str = ""
    values: dict = field(default_factory=dict)

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.criterion:>2} {self.name}: {self.detail}"

    def to_dict(self):
        return {
            "criterion": self.criterion,
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "values": self.values,
        }


def _fmt(xs):
    return "[" + ", ".join(f"{x:.3g}" for x in xs) + "]"


# ---------------------------------------------------------------------------
# scaling: criteria 1, 2, 3, 9, 11


def batch_configs(ns, seeds, seed=0, jam=False):
    out = {}
    for n in ns:
        adv = {"kind": "batch", "n": n}
        if jam:
            adv = {
                "kind": "composite",
                "parts": [
                    adv,
                    {"kind": "window_jammer", "intervals": [[0, 1]], "period": 10, "until": JAM_SPAN * n},
                ],
            }
        out[n] = [RunConfig(adversary=adv, seed=seed + s) for s in range(seeds)]
    return out


def _sweep(ns, seeds, seed, jam, jobs):
    cfgs = batch_configs(ns, seeds, seed, jam)
    flat = [c for n in ns for c in cfgs[n]]
    res = map_runs(flat, jobs)
    return {n: res[i * seeds: (i + 1) * seeds] for i, n in enumerate(ns)}


def _ratio_checks(by_n, per_doubling=False):
    ns = sorted(by_n)
    ms = [aggregate([r["makespan"] for r in by_n[n]], "median") for n in ns]
    ratios = []
    for i in range(len(ns) - 1):
        r = ms[i + 1] / ms[i]
        doublings = math.log2(ns[i + 1] / ns[i])
        ratios.append(r ** (1 / doublings) if per_doubling else r)
    per_n = [m / n for m, n in zip(ms, ns)]
    att = [aggregate([r["mean_attempts"] for r in by_n[n]], "mean") / math.log(n) ** 2 for n in ns]
    return ns, ms, ratios, per_n, att


def scaling(seeds=50, seed=0, jobs=1, ns=BATCH_SIZES, jam_ns=JAM_SIZES):
    """Batch sweeps without and with bounded jamming."""
    clean = _sweep(ns, seeds, seed, False, jobs)
    jammed = _sweep(jam_ns, seeds, seed, True, jobs)
    out = []

    ns_, ms, ratios, per_n, att = _ratio_checks(clean)
    ok1 = all(1.5 <= r <= 2.7 for r in ratios) and max(per_n) / min(per_n) <= 2
    out.append(Verdict(1, "linear makespan", ok1,
                       f"doubling ratios {_fmt(ratios)}, makespan/n {_fmt(per_n)} "
                       f"(max/min {max(per_n) / min(per_n):.3f})",
                       {"n": list(ns_), "median_makespan": ms, "ratios": ratios, "makespan_per_n": per_n}))
    spread = max(att) / min(att)
    out.append(Verdict(2, "attempts growth", spread <= 2,
                       f"mean attempts / ln^2 n {_fmt(att)} (max/min {spread:.3f})",
                       {"n": list(ns_), "attempts_per_ln2n": att}))

    jns, jms, jratios, jper_n, jatt = _ratio_checks(jammed, per_doubling=True)
    jspread = max(jatt) / min(jatt)
    ok3 = all(1.5 <= r <= 2.7 for r in jratios) and max(jper_n) / min(jper_n) <= 2 and jspread <= 2
    disrupted = [aggregate([r["D"] for r in jammed[n]], "mean") / n for n in jns]
    out.append(Verdict(3, "robustness to disruption", ok3,
                       f"per-doubling ratios {_fmt(jratios)}, makespan/n {_fmt(jper_n)}, "
                       f"attempt spread {jspread:.3f}, D/n {_fmt(disrupted)}",
                       {"n": list(jns), "median_makespan": jms, "ratios": jratios,
                        "makespan_per_n": jper_n, "attempts_per_ln2n": jatt, "D_per_n": disrupted}))

    if 1024 in clean:
        tails = pooled_tail_ratios(clean[1024])
        checked = {k: r for k, (r, cnt) in tails.items() if cnt >= 100}
        ok9 = all(r <= 0.9 for r in checked.values())
        out.append(Verdict(9, "reset decay", ok9,
                           "tail ratios " + ", ".join(f"k={k}: {r:.3f}" for k, r in checked.items()),
                           {"tail_ratios": {k: list(v) for k, v in tails.items()}}))

    wastes = [aggregate([r["waste"] for r in clean[n]], "mean") for n in ns_]
    ok11 = wastes[-1] <= 1.5 * wastes[0] and all(w < 0.95 for w in wastes)
    out.append(Verdict(11, "bounded waste", ok11,
                       f"mean waste {_fmt(wastes)} (last/first {wastes[-1] / wastes[0]:.3f})",
                       {"n": list(ns_), "waste": wastes}))
    violations = sum(r["prefix_violations"] for g in (clean, jammed) for rs in g.values() for r in rs)
    return out, violations


# ---------------------------------------------------------------------------
# beb-contrast: criterion 4


def contrast_configs(seeds=20, seed=0, horizon=200_000, burst=512, burst_slot=1000, period=3,
                     protocols=("rebackoff2", "beb")):
    adv = {"kind": "stream_burst", "period": period, "burst_size": burst, "burst_slot": burst_slot}
    return {
        p: [RunConfig(protocol=p, adversary=adv, seed=seed + s, stop="max_slots", max_slots=horizon)
            for s in range(seeds)]
        for p in protocols
    }


def beb_contrast(seeds=20, seed=0, jobs=1, horizon=200_000, burst=512, burst_slot=1000, period=3):
    cfgs = contrast_configs(seeds, seed, horizon, burst, burst_slot, period)
    res = {p: map_runs(c, jobs, window=(burst_slot, horizon)) for p, c in cfgs.items()}
    rb = aggregate([r["backlog"] for r in res["rebackoff2"]], "median")
    beb = aggregate([r["backlog"] for r in res["beb"]], "median")
    rb_thr = aggregate([r["window_lambda"] for r in res["rebackoff2"]], "median")
    beb_thr = aggregate([r["window_lambda"] for r in res["beb"]], "median")
    thr_ratio = rb_thr / beb_thr if beb_thr else math.inf
    checks = {
        "rebackoff_backlog_le_10": rb <= 10,
        "beb_backlog_ge_10x": beb >= 10 * rb,
        "throughput_ge_5x": thr_ratio >= 5,
    }
    detail = (f"median backlog Re-Backoff {rb:g}, BEB {beb:g} ({beb / max(rb, 1e-12):.2f}x); "
              f"post-burst throughput {rb_thr:.4f} vs {beb_thr:.4f} ({thr_ratio:.2f}x); "
              + ", ".join(f"{k}={'ok' if v else 'no'}" for k, v in checks.items()))
    verdict = Verdict(4, "BEB contrast", all(checks.values()), detail,
                      {"backlog": {"rebackoff2": rb, "beb": beb},
                       "window_lambda": {"rebackoff2": rb_thr, "beb": beb_thr}, "checks": checks})
    violations = sum(r["prefix_violations"] for rs in res.values() for r in rs)
    return [verdict], violations


# ---------------------------------------------------------------------------
# probability bounds: criteria 5 and 12

BOUND_MULTISETS = ((1,), (2,), (1, 1), (2, 4, 8), (1,) * 8)


def bounds(trials=100_000, seed=0):
    reports = [check_slot_bounds(a, trials=trials, seed=seed + i) for i, a in enumerate(BOUND_MULTISETS)]
    parts = []
    for r in reports:
        bad = [k for k, v in r.verdicts.items() if not v]
        parts.append(f"{list(r.ages)}: " + ("ok" if not bad else "failed " + ",".join(bad)))
    v5 = Verdict(5, "per-slot probability bounds", all(r.passed for r in reports), "; ".join(parts),
                 {"reports": [{"ages": list(r.ages), "estimates": r.estimates, "bounds": r.bounds,
                               "verdicts": r.verdicts} for r in reports]})
    p = 1 - math.exp(-0.5)
    tp = check_trial_prefixes(p, 2**14, 10_000, seed)
    v12 = Verdict(12, "trial-prefix game", tp.passed,
                  f"fraction {tp.fraction:.4f} (se {tp.standard_error:.4f}) vs 0.5",
                  {"fraction": tp.fraction, "standard_error": tp.standard_error})
    return [v5, v12]


# ---------------------------------------------------------------------------
# sigma: criterion 6


def random_age_multisets(count, seed=0, max_size=100, max_age=10**6):
    """Mix of wide (log-uniform) and narrow (many ties) age multisets."""
    rng = np.random.default_rng(seed)
    for i in range(count):
        m = int(rng.integers(1, max_size + 1))
        if i % 2:
            yield rng.integers(1, int(rng.integers(1, 20)) + 1, m)
        else:
            yield np.minimum(np.exp(rng.uniform(0, math.log(max_age), m)).astype(np.int64) + 1, max_age)


def sigma_suite(count=10_000, seed=0):
    mismatches = [a for a in random_age_multisets(count, seed) if sigma(a) != sigma_oracle(a)]
    return [Verdict(6, "sigma oracle equivalence", not mismatches,
                    f"{len(mismatches)} mismatches over {count} multisets",
                    {"mismatches": len(mismatches)})]


# ---------------------------------------------------------------------------
# sync: criterion 8


def random_single_channel_adversary(rng):
    parts = []
    for _ in range(int(rng.integers(1, 4))):
        parts.append({"kind": "batch", "n": int(rng.integers(1, 7)), "slot": int(rng.integers(0, 80))})
    if rng.random() < 0.5:
        parts.append({"kind": "poisson", "rate": float(rng.uniform(0, 0.03)), "until": 150})
    intervals = []
    for _ in range(int(rng.integers(1, 4))):
        a = int(rng.integers(0, 200))
        intervals.append([a, a + int(rng.integers(1, 12))])
    jam = {"kind": "window_jammer", "intervals": intervals, "channel": "control"}
    if rng.random() < 0.3:
        jam["period"] = int(rng.integers(20, 60))
        jam["until"] = 600
    parts.append(jam)
    return {"kind": "composite", "parts": parts}


def sync(runs=1000, seed=0, max_slots=4000):
    rng = np.random.default_rng(seed)
    bad_runs = 0
    total = 0
    for i in range(runs):
        cfg = RunConfig(protocol="rebackoff1", adversary=random_single_channel_adversary(rng),
                        seed=seed + i, verbosity="per_packet", max_slots=max_slots)
        v = check_sync_agreement(run(cfg))
        total += len(v)
        bad_runs += bool(v)
    return [Verdict(8, "single-channel synchronization", total == 0,
                    f"{total} disagreements in {bad_runs} of {runs} runs",
                    {"disagreements": total, "runs": runs})]


# ---------------------------------------------------------------------------
# borrower: criterion 10


def borrower(plays=1000, seed=0, n=1000):
    params = GameParams(0.5, 0.5)
    means = borrowed_means(params, n, plays, seed)
    bound = params.finite_bound(n) * 1.05
    v10 = Verdict(10, "bad-borrower finite bound", all(m <= bound for m in means.values()),
                  ", ".join(f"{k} {v:.0f}" for k, v in means.items()) + f" (limit {bound:.0f})",
                  {"means": means, "limit": bound})
    return [v10]


def borrower_infinite(seeds=1000, cap=10**5, seed=0):
    """Fraction of doubling-strategy plays whose measurement points reach
    into the second half of the horizon."""
    params = GameParams(0.5, 0.5)
    late = [play_infinite(params, Doubling(), cap, seed + s).last > cap // 2 for s in range(seeds)]
    return float(np.mean(late))


# ---------------------------------------------------------------------------


def run_suite(name, seed=0, jobs=1):
    """Verdicts of one named suite."""
    if name == "bounds":
        return bounds(seed=seed)
    if name == "sigma":
        return sigma_suite(seed=seed)
    if name == "sync":
        return sync(seed=seed)
    if name == "borrower":
        return borrower(seed=seed)
    if name == "scaling":
        return scaling(seed=seed, jobs=jobs)[0]
    if name == "beb-contrast":
        return beb_contrast(seed=seed, jobs=jobs)[0]
    if name == "prefix":
        return [prefix_verdict(scaling(seed=seed, jobs=jobs)[1] + beb_contrast(seed=seed, jobs=jobs)[1])]
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")


def prefix_verdict(violations):
    return Verdict(7, "prefix fullness", violations == 0,
                   f"{violations} violations across the scaling and contrast traces",
                   {"violations": violations})
