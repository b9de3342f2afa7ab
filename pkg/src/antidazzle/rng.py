"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from ``(seed, *tags)``. Streams for different noise sources or
samples never share state, so results do not depend on evaluation order or on
how work is split across processes.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK32 = 0xFFFFFFFF


def _words(value: int) -> list[int]:
    value = int(value)
    if value < 0:
        raise ValueError("seeds must be nonnegative")
    words = []
    while True:
        words.append(value & _MASK32)
        value >>= 32
        if not value:
            return words


def _tag_word(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK32
    return zlib.crc32(str(tag).encode("utf-8"))


def stream(seed: int, *tags) -> np.random.Generator:
    """Independent Philox generator for ``seed`` and a tag path."""
    entropy = _words(seed) + [len(tags)] + [_tag_word(t) for t in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *tags) -> int:
    """64-bit child seed, a pure function of ``(seed, tags)``."""
    entropy = _words(seed) + [len(tags)] + [_tag_word(t) for t in tags]
    lo, hi = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)
