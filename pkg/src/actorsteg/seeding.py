"""Deterministic seed derivation for named random substreams.

A single master seed drives every random component (source images,
embeddings, actor simulation, learners) through named substreams, so any
stage can be regenerated independently and whole runs replay bit-identically.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *parts) -> int:
    """Stable 64-bit seed for the substream of ``master`` named by ``parts``.

    Parts may be ints or strings; they are joined into a path and hashed,
    so renaming or reordering a substream changes every seed below it.
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode("ascii"))
    for part in parts:
        h.update(b"/")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def rng_for(master: int, *parts) -> np.random.Generator:
    """PCG64 generator seeded from ``derive_seed(master, *parts)``."""
    return np.random.default_rng(derive_seed(master, *parts))
