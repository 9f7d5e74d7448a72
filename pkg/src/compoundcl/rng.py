"""Seed handling.

All randomness in the package flows from one root seed through named
sub-streams, so independent components (data generation, weight init,
augmentation, orderings, ...) can be re-seeded without affecting each
other and results do not depend on call order.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(root_seed: int, *names) -> np.random.Generator:
    """Return a Generator for the sub-stream identified by ``names``.

    Each name component (str or int) is hashed into the seed entropy, so
    ``substream(s, "augment", epoch, i)`` is a stable, independent stream.
    """
    entropy = [int(root_seed) & 0xFFFFFFFF]
    for name in names:
        entropy.append(zlib.crc32(str(name).encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def as_generator(seed_or_rng) -> np.random.Generator:
    """Accept an int seed or an existing Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
