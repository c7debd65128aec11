"""Named, reproducible random sub-streams derived from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Generator for stage ``name`` (and optional indices) under root ``seed``.

    Stages draw from independent streams, so changing how much one stage
    consumes never shifts another.
    """
    key = (zlib.crc32(name.encode()), *map(int, index))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
