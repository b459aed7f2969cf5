"""Deterministic, splittable random streams.

Every stochastic routine in this package derives its generator from a
``(seed, purpose, index)`` triple instead of sharing one global generator.
Purposes are short strings ("supports-random", "values", ...) hashed to a
32-bit key; the index selects a generation block.  Two consequences we rely
on everywhere:

* regenerating any one block never requires replaying the blocks before it,
  so parallel and sequential generation are bit-identical;
* unrelated draw sites (support indices vs. coefficient values) cannot
  desynchronise each other when one of them changes its draw count.
"""

from __future__ import annotations

import zlib

import numpy as np

# Rows per generation block.  Part of the reproducibility contract: the same
# (seed, purpose) pair always splits work into blocks of this many samples,
# so changing worker counts cannot change output.
BLOCK = 8192


def purpose_key(purpose: str) -> int:
    """Stable 32-bit key for a stream purpose string."""
    return zlib.crc32(purpose.encode("utf-8")) & 0xFFFFFFFF


def child_sequence(seed: int, purpose: str, index: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(purpose_key(purpose), index))


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Generator for block `index` of the given purpose."""
    return np.random.default_rng(child_sequence(seed, purpose, index))


def block_ranges(total: int, block: int = BLOCK) -> list[tuple[int, int, int]]:
    """Partition ``range(total)`` into (block_index, start, stop) triples."""
    return [(b, s, min(s + block, total)) for b, s in enumerate(range(0, total, block))]
