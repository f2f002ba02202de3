"""Counter-based uniforms keyed by (run key, packet id, counter, stream).

Every packet gets its own stream without any per-packet generator object:
a draw is a pure hash of its coordinates, so adding packets or reordering
evaluation never shifts anyone else's randomness.  The same function is
available as plain Python (reference paths) and as a numba kernel helper.
"""
import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_C_COUNTER = 0xC2B2AE3D27D4EB4F
_C_STREAM = 0x165667B19E3779F9
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def derive_key(seed, *tags):
    """64-bit run key from an integer seed (plus optional integer tags)."""
    entropy = [int(seed) & MASK64] + [int(t) for t in tags]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _mix(z):
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def uniform(key, pid, counter, stream):
    """Uniform [0, 1) draw for one coordinate tuple."""
    x = _mix((key ^ ((pid * _GOLDEN) & MASK64)) & MASK64)
    x = _mix(x ^ ((counter * _C_COUNTER) & MASK64))
    x = _mix(x ^ ((stream * _C_STREAM) & MASK64))
    return (x >> 11) * _INV53


@njit(cache=True, inline="always")
def _mix_nb(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def uniform_nb(key, pid, counter, stream):
    return stream_uniform_nb(counter_state_nb(packet_state_nb(key, pid), counter), stream)


# The three stages of ``uniform`` exposed separately so kernels can cache
# the per-packet and per-slot prefixes of the hash.


@njit(cache=True, inline="always")
def packet_state_nb(key, pid):
    return _mix_nb(np.uint64(key) ^ (np.uint64(pid) * np.uint64(_GOLDEN)))


@njit(cache=True, inline="always")
def counter_state_nb(h, counter):
    return _mix_nb(h ^ (np.uint64(counter) * np.uint64(_C_COUNTER)))


@njit(cache=True, inline="always")
def stream_bits_nb(h, stream):
    """The 53-bit integer m behind ``stream_uniform_nb`` (u = m * 2**-53)."""
    return _mix_nb(h ^ (np.uint64(stream) * np.uint64(_C_STREAM))) >> np.uint64(11)


@njit(cache=True, inline="always")
def stream_uniform_nb(h, stream):
    x = _mix_nb(h ^ (np.uint64(stream) * np.uint64(_C_STREAM)))
    return np.float64(x >> np.uint64(11)) * _INV53
