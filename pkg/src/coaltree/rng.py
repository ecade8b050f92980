"""Seedable, splittable random-number streams.

All randomness in the package flows through ``numpy.random.Generator``
(PCG64).  Replicate batches derive independent substreams from a single
64-bit base seed with ``substream(base_seed, index)``; the resulting draws
are identical across platforms and independent of the order in which the
replicates are scheduled.
"""

from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.SeedSequence | np.random.Generator"


def as_generator(seed) -> np.random.Generator:
    """Coerce an int, SeedSequence or Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def substream(base_seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index`` of a batch keyed by
    ``base_seed``.  Deterministic in (base_seed, index)."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))
