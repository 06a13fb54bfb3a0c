"""Counter-based random streams addressed by (seed, label, ...) paths.

Every random draw in a run comes from a stream derived from the run seed
plus a purpose path, e.g. ``stream(seed, "data", agent_id)``.  Streams are
Philox generators keyed through a SeedSequence, so distinct paths are
statistically independent and a (config, seed) pair reproduces byte-exactly.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _material(part: object) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & (2**64 - 1)
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")
    raise TypeError(f"stream path parts must be int or str, got {type(part)!r}")


def stream(*path: object) -> np.random.Generator:
    """Independent generator for the given (seed, purpose, ...) path."""
    ss = np.random.SeedSequence([_material(p) for p in path])
    return np.random.Generator(np.random.Philox(ss))
