import numpy as np
import pytest

from rebackoff.engine import RunConfig
from rebackoff.trace import COLUMNS, Trace


def synthetic_trace(slots, events=(), n_packets=0, protocol="rebackoff2", designations=None, **cols):
    """A hand-built trace: every column defaults to a quiet, non-empty slot."""
    columns = {k: np.zeros(slots, dtype=v) for k, v in COLUMNS.items()}
    columns["designation"][:] = -1
    if protocol == "beb":
        columns["control_tx"][:] = -1
    for k, v in cols.items():
        columns[k][:] = v
    ev = np.asarray(events, dtype=np.int64).reshape(-1, 3)
    packets = {
        "arrival": np.zeros(n_packets, np.int64),
        "success": np.full(n_packets, -1, np.int64),
        "resets": np.zeros(n_packets, np.int64),
        "attempts_control": np.zeros(n_packets, np.int64),
        "attempts_data": np.zeros(n_packets, np.int64),
    }
    cfg = RunConfig(protocol=protocol, verbosity="per_packet", stop="max_slots", max_slots=slots)
    return Trace(cfg, columns, ev, packets, complete=False, designations=designations)


# -- acceptance report ---------------------------------------------------------

_ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])


@pytest.fixture
def report():
    """Record a verdict line for the end-of-run summary and print it."""
    def add(verdict):
        line = verdict.line()
        _ACCEPTANCE[verdict.criterion] = line
        print(line)
        return verdict
    return add
