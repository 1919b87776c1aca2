"""
Counter-based random streams
Each stream is a pure function of (seed, index, tag) so results do not
depend on scheduling or on how many streams were consumed before it.
"""
from enum import IntEnum

import numpy as np

SEED_MASK = (1 << 64) - 1


class StreamTag(IntEnum):
    """Substream tags; rows and columns of a replicate never share a stream"""

    ROWS = 1
    COLS = 2
    NAIVE = 3
    RESPONSES = 4
    MASK = 5
    PATTERN = 6
    LABELS = 7


def stream(seed: int, index: int, tag: StreamTag) -> np.random.Generator:
    """
    Build an independent generator for one (seed, index, tag) triple

    Args:
        seed: 64-bit run seed
        index: replicate, draw or block index
        tag: substream tag

    Returns:
        numpy Generator on a Philox bit generator
    """
    if index < 0:
        raise ValueError(f"stream index must be non-negative, got {index}")
    seq = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=(int(index), int(tag)))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, attempt: int) -> int:
    """Derive a fresh 64-bit seed for a retry"""
    seq = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=(int(attempt), 0xDE))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
