"""Deterministic, purpose-keyed random streams.

Every random draw in the package comes from a counter-based Philox generator
whose key is derived from ``(seed, tag, rep)``. Streams are independent of
each other and of worker scheduling: the i-th variate of a stream is the same
no matter what was drawn before it or on which process the draw happens.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream"]


def stream(seed: int, tag: str, rep: int = 0) -> np.random.Generator:
    """Return the generator for the (seed, tag, rep) stream.

    Node-level draws are positional: variate i of the stream belongs to
    node i. Re-creating the stream always replays the identical sequence.
    """
    digest = hashlib.sha256(f"{seed}|{tag}|{rep}".encode()).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
