"""Deterministic RNG derivation.

Every stochastic component takes either an explicit ``numpy.random.Generator``
or a 64-bit seed from which per-task generators are derived. Derivation mixes
the seed with a role tag and an index through ``numpy.random.SeedSequence``,
so independent work items (dataset examples, sampling replicates) get
decorrelated, reproducible streams regardless of execution order.
"""

from __future__ import annotations

import numpy as np

# Role tags keep derived streams for different purposes disjoint.
EVIDENCE_TAG = 1
SPLIT_TAG = 2
TRAIN_TAG = 3
LWS_TAG = 4
SUBSET_TAG = 5


def check_seed(seed: int) -> int:
    """Validate a user-supplied seed (unsigned, fits in 64 bits)."""
    if not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return int(seed)


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Generator derived deterministically from ``seed`` and a tag path.

    Same (seed, path) always yields a bit-identical stream.
    """
    check_seed(seed)
    return np.random.default_rng(np.random.SeedSequence([seed, *path]))
