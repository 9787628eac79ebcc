"""Seeding helpers.

All stochastic operations take either an explicit integer seed (or tuple of
integers) or a ready ``numpy.random.Generator``.  Generators are built on
Philox, a counter-based bit generator, so trial streams derived from
``(base_seed, *indices)`` tuples are independent and reproducible across
process and thread boundaries.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

SeedLike = Union[int, Sequence[int], np.random.SeedSequence, np.random.Generator]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a Philox generator for ``seed``; pass a Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    elif isinstance(seed, (tuple, list)):
        ss = np.random.SeedSequence(tuple(int(s) for s in seed))
    else:
        ss = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


def spawn_rngs(seed: SeedLike, count: int) -> list[np.random.Generator]:
    """Derive ``count`` independent generators from one seed."""
    if isinstance(seed, np.random.Generator):
        children = seed.bit_generator.seed_seq.spawn(count)
    else:
        if isinstance(seed, np.random.SeedSequence):
            ss = seed
        elif isinstance(seed, (tuple, list)):
            ss = np.random.SeedSequence(tuple(int(s) for s in seed))
        else:
            ss = np.random.SeedSequence(int(seed))
        children = ss.spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]
