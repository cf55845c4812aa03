"""Seeded random streams.

Every stream is a numpy ``Generator`` over the Philox 4x64 counter-based bit
generator, keyed by a SeedSequence built from the task seed plus a tuple of
integer tags, so independent consumers never share state.
"""
import zlib

import numpy as np

STREAM_TAGS = {
    "system": 1,
    "noise": 2,
    "allocator": 3,
    "agent": 4,
    "bandit": 5,
}


def tag(name: str) -> int:
    if name in STREAM_TAGS:
        return STREAM_TAGS[name]
    return zlib.crc32(name.encode()) + 1000


def make_rng(seed: int, *tags) -> np.random.Generator:
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    key += [tag(t) if isinstance(t, str) else int(t) for t in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
