"""Seed stream splitting.

A master seed plus a tuple of purpose tags maps to a child seed through
SHA-256, so every random draw is fixed by (seed, tags) and never by the
order in which workers happen to run.
"""

import hashlib
from typing import Union

import numpy as np

Tag = Union[str, int, float]


def derive_seed(seed: int, *tags: Tag) -> int:
    """Derive a 63-bit child seed from a master seed and purpose tags."""
    text = "/".join([str(int(seed))] + [repr(tag) for tag in tags])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def child_rng(seed: int, *tags: Tag) -> np.random.Generator:
    """Return a PCG64 generator for the given purpose."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *tags)))
