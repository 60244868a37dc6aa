"""
Reproducible random streams.

Every stream is a numpy Generator over the counter-based Philox bit
generator, keyed by a SeedSequence built from the master seed plus a tuple
of integers. Streams depend only on their key, never on worker count or
execution order, so a trial produces the same draws wherever it runs.
"""

from typing import Sequence

import numpy as np

# Purpose tags for per-trial streams
FRAMES = 1
MATRIX = 2
PROGRAM = 3
NOISE = 4
ADAPT_PROGRAM = 5

# Measurement count used to key streams shared by every M (the frames)
SHARED_M = 0


def make_stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return a Philox-backed generator for ``(master_seed, *key)``."""
    entropy: Sequence[int] = [int(master_seed)] + [int(k) for k in key]
    if any(k < 0 for k in entropy):
        raise ValueError("stream keys must be nonnegative integers")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def trial_stream(master_seed: int, m: int, trial: int, purpose: int) -> np.random.Generator:
    """Per-trial stream for one purpose; independent of the comparison mode."""
    return make_stream(master_seed, m, trial, purpose)


def adapt_stream(master_seed: int, m: int, trial: int, iteration: int) -> np.random.Generator:
    """Programming stream for the matrix update made at ``iteration``."""
    return make_stream(master_seed, m, trial, ADAPT_PROGRAM, iteration)
