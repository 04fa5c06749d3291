"""Deterministic per-node random streams.

Every consumer of randomness gets its own ``random.Random`` keyed by
(seed, replica, node, purpose), so adding or removing one consumer never
shifts the draws seen by another.
"""

from __future__ import annotations

import hashlib
import random


def stream(seed: int, replica: int, node: int, purpose: str) -> random.Random:
    """Independent stream for one (seed, replica, node, purpose) tuple."""
    key = f"{seed}:{replica}:{node}:{purpose}".encode()
    digest = hashlib.sha256(key).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def node_streams(seed: int, replica: int, node_count: int,
                 purpose: str = "sim") -> list[random.Random]:
    return [stream(seed, replica, i, purpose) for i in range(node_count)]
