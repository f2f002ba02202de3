"""Simulation and analysis of Re-Backoff contention resolution.

The usual entry points::

    from rebackoff import RunConfig, run, run_metrics
    trace = run(RunConfig(adversary={"kind": "batch", "n": 256}, seed=1))
    print(run_metrics(trace).throughput)
"""
from .adversary import AdversaryDirective, ConfigError, make_adversary
from .analysis import (
    check_prefix_fullness,
    check_slot_bounds,
    check_sync_agreement,
    contention,
    interval_metrics,
    run_metrics,
    segment_epochs,
    sigma,
    sigma_oracle,
)
from .engine import RunConfig, run, run_reference
from .protocols import ProtocolParams
from .trace import Trace

__all__ = [
    "AdversaryDirective",
    "ConfigError",
    "ProtocolParams",
    "RunConfig",
    "Trace",
    "check_prefix_fullness",
    "check_slot_bounds",
    "check_sync_agreement",
    "contention",
    "interval_metrics",
    "make_adversary",
    "run",
    "run_metrics",
    "run_reference",
    "segment_epochs",
    "sigma",
    "sigma_oracle",
]
