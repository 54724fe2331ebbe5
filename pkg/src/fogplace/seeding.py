"""Deterministic per-stage seed derivation from a single 64-bit run seed."""
import zlib

import numpy as np


def stage_seed(seed: int, stage: str) -> int:
    """Derive a stable 64-bit seed for a named stage."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(stage.encode())])
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(stage_seed(seed, stage))
