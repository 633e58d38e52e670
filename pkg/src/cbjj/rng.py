"""Counter-based random streams.

Every random quantity is drawn from a Philox stream keyed by the run seed
plus a tuple of integers (or strings, hashed stably) that identifies the
work item. Streams never depend on execution order or worker count.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _word(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    digest = hashlib.sha256(str(key).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed: int, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    words = [_word(seed)] + [_word(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def derive_seed(seed: int, *keys) -> int:
    """Stable 63-bit sub-seed for ``(seed, *keys)``."""
    h = hashlib.sha256(repr((_word(seed),) + tuple(_word(k) for k in keys)).encode())
    return int.from_bytes(h.digest()[:8], "little") >> 1
