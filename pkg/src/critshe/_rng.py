"""Counter-based random-number streams for reproducible parallelism.

Every stochastic component draws from a Philox generator whose 128-bit key
is derived from a user seed plus a tuple of integer tags (replica index,
sample block, diagram index, ...).  Distinct tags give statistically
independent streams, and a stream's output depends only on (seed, tags) --
never on how work is partitioned across workers -- which is what makes
fixed-seed results bit-identical for any worker count.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "substream_seed"]


def _key(seed: int, tags: tuple[int, ...]) -> np.ndarray:
    entropy = (int(seed) & 0xFFFFFFFFFFFFFFFF,) + tuple(int(t) & 0xFFFFFFFFFFFFFFFF for t in tags)
    return np.random.SeedSequence(entropy).generate_state(2, np.uint64)


def stream(seed: int, *tags: int) -> np.random.Generator:
    """A Philox generator keyed by (seed, *tags)."""
    return np.random.Generator(np.random.Philox(key=_key(seed, tags)))


def substream_seed(seed: int, *tags: int) -> int:
    """A 64-bit derived seed for handing to a nested component."""
    return int(_key(seed, tags)[0])
