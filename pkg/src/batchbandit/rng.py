"""Deterministic random-stream derivation.

Every stochastic component gets its own PCG64 generator derived from the
master seed plus a tuple of string/int labels (purpose, article id, repeat
index, ...). Labels are hashed with SHA-256, so streams are independent of
iteration order and stable across runs and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed_sequence(master_seed: int, *labels: str | int) -> np.random.SeedSequence:
    """Build a SeedSequence keyed by the master seed and a label path."""
    digest = hashlib.sha256()
    for label in labels:
        digest.update(str(label).encode("utf-8"))
        digest.update(b"\x1f")
    words = np.frombuffer(digest.digest(), dtype=np.uint32)
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, *map(int, words)])


def derive_rng(master_seed: int, *labels: str | int) -> np.random.Generator:
    """Return a fresh PCG64 Generator for the given label path."""
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(master_seed, *labels)))
