"""Named deterministic RNG streams for common-random-number experiments.

Every stochastic draw in a run comes from a stream keyed by (master seed,
purpose tag, day, window...), so benchmark policies evaluated on the same
world consume identical randomness regardless of execution order or
threading.
"""

from __future__ import annotations

import numpy as np

STREAM_FLEET = 1
STREAM_SCENARIOS = 2
STREAM_WAITS = 3
STREAM_SYNTH_DEMAND = 4
STREAM_SYNTH_STATIONS = 5
STREAM_SYNTH_TRIPS = 6


def rng_stream(master_seed: int, *key: int) -> np.random.Generator:
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in key)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
