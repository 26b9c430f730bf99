"""Deterministic random streams.

Every stochastic component draws from a counter-based Philox generator keyed
by ``(seed, *key)`` through :class:`numpy.random.SeedSequence` spawn keys.
Distinct keys give statistically independent streams, so benchmark repeats
can run in parallel and still reproduce the serial results bit for bit.

Stream key conventions used across the package:

* ``(STREAM_TRUE_B,)``            -- coefficient-tensor construction
* ``(STREAM_TRAIN, repeat)``      -- training data of one benchmark repeat
* ``(STREAM_TEST, repeat)``       -- test data of one benchmark repeat
* ``(STREAM_FIT, method, repeat)``-- per-fit seed inside the benchmark
* ``(STREAM_NOISE, iteration)``   -- noise draws inside one augmented fit
* ``(STREAM_CV,)``                -- cross-validation fold assignment
"""

from __future__ import annotations

import numpy as np

STREAM_TRUE_B = 0
STREAM_TRAIN = 1
STREAM_TEST = 2
STREAM_FIT = 3
STREAM_NOISE = 4
STREAM_CV = 5


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return a Philox generator for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seed=ss))


def derive_seed(seed: int, *key: int) -> int:
    """Collapse ``(seed, *key)`` into a single integer seed for sub-engines."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
