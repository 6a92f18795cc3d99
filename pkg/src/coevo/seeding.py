"""One 64-bit seed, expanded into independent per-subsystem streams.

Each subsystem asks for its stream by a fixed label, so adding a new consumer
never shifts the draws another consumer sees.
"""
from __future__ import annotations

import zlib

import numpy as np


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def rng_for(seed: int | None, label: str, *extra: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(label_key(label), *extra))
    return np.random.default_rng(ss)
