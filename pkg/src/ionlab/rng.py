"""Counter-based random streams for the Monte Carlo kernels.

Each simulated sequence owns a 64-bit key derived from
``(master_seed, sequence_index)`` through :class:`numpy.random.SeedSequence`.
Inside the compiled kernels the key drives a SplitMix64 counter, so the
draws of sequence ``j`` never depend on which worker ran it or in which
order.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# spawn-key slot reserved for the background-count stream
BACKGROUND_STREAM = 2**40


def sequence_key(master_seed: int, index: int) -> np.uint64:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return ss.generate_state(1, dtype=np.uint64)[0]


def sequence_keys(master_seed: int, start: int, stop: int) -> np.ndarray:
    return np.array([sequence_key(master_seed, j) for j in range(start, stop)],
                    dtype=np.uint64)


@njit(cache=True, inline="always")
def splitmix_next(state):
    """Advance ``state`` and return ``(new_state, 64-bit output)``."""
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return state, z ^ (z >> _S31)


@njit(cache=True, inline="always")
def uniform(state):
    """Uniform double on [0, 1)."""
    state, z = splitmix_next(state)
    return state, (z >> _S11) * _INV53


@njit(cache=True)
def normal_pair(state):
    """Two independent standard normals by Box-Muller."""
    state, u1 = uniform(state)
    state, u2 = uniform(state)
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    return state, r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)


@njit(cache=True)
def uniform_block(key, n):
    """First ``n`` uniforms of the stream keyed by ``key`` (for testing)."""
    out = np.empty(n)
    state = key
    for i in range(n):
        state, out[i] = uniform(state)
    return out
