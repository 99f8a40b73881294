"""
Seeded random streams
Each consumer draws from its own generator keyed by (seed, stream, *coordinates),
so streams never interfere and any round or client can be replayed in isolation.
"""

import numpy as np

STREAM_INIT = 1
STREAM_DATA = 2
STREAM_HOLDOUT = 3
STREAM_PARTITION = 4
STREAM_SAMPLING = 5
STREAM_LOCAL_SHUFFLE = 6
STREAM_HARMONIZE = 7


def make_rng(seed: int, stream: int, *coordinates: int) -> np.random.Generator:
    """Independent generator for one stream; seeds must be non-negative"""
    entropy = [int(seed), int(stream)] + [int(c) for c in coordinates]
    if any(value < 0 for value in entropy):
        raise ValueError(f"seed material must be non-negative, got {entropy}")
    return np.random.default_rng(entropy)
