"""Deterministic RNG substreams derived from a single master seed.

Every stochastic component draws from a named substream so that results
are reproducible bit-for-bit regardless of evaluation order or thread
count.  Trial i always sees substream(seed, "trial", i) no matter which
worker runs it.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _key_part(part: object) -> int:
    # Integers index directly; everything else hashes its string form.
    if isinstance(part, (int, np.integer)) and not isinstance(part, bool):
        value = int(part)
        if value < 0:
            raise ValueError("substream index must be non-negative")
        return value & 0xFFFFFFFF
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def substream(master_seed: int, *path: object) -> np.random.Generator:
    """Return an independent Generator for the given (seed, path) pair."""
    if not path:
        return np.random.default_rng(master_seed)
    spawn_key = tuple(_key_part(p) for p in path)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=spawn_key)
    return np.random.default_rng(seq)
