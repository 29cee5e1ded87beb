"""Named, reproducible random substreams.

Every source of randomness in the package derives from a single integer seed
plus a tuple of names (e.g. ``("batches",)`` or ``("stability", draw)``), so
runs are bit-reproducible and independent stages never share a stream.
"""

import zlib

import numpy as np


def substream(seed: int, *names) -> np.random.Generator:
    """Return a generator for the substream identified by ``names``.

    The same (seed, names) pair always yields the same stream; distinct
    names yield statistically independent streams.
    """
    keys = [zlib.crc32(str(n).encode("utf-8")) for n in names]
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), *keys]))


def derive_seed(seed: int, *names) -> int:
    """Derive a child integer seed, for APIs that take a seed rather than a stream."""
    return int(substream(seed, *names).integers(0, 2**31 - 1))
