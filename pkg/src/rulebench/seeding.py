"""Deterministic seed derivation and random-stream construction.

Every random stream in the package is a numpy PCG64 generator seeded with a
64-bit integer produced by :func:`derive_seed`. The derivation is fixed so
results are reproducible across platforms and so independent streams (one per
experiment cell, one per episode reset, one per agent) never interact:
adding an agent or task to a run leaves all other streams untouched.

Derivation: each part is encoded as ``i:<decimal>`` for integers or
``s:<utf-8>`` for strings, the encodings are joined with ``0x1f`` separators,
and the seed is the big-endian first 8 bytes of the SHA-256 digest.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "make_rng"]


def derive_seed(*parts: int | str) -> int:
    """Hash a sequence of ints/strings into a 64-bit seed."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        tag = f"i:{part}" if isinstance(part, int) else f"s:{part}"
        h.update(tag.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


def make_rng(*parts: int | str) -> np.random.Generator:
    """PCG64 generator seeded by ``derive_seed(*parts)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
