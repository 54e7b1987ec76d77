import logging
import math
import os
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

THREADS_ENV = "WARTEM_THREADS"


def derive_seed(parent: int, *keys: int) -> int:
    """
    Derive an independent 64-bit child seed from a parent seed and integer keys.

    This is the seed-splitting contract used everywhere a run needs a fresh
    random stream: ``derive_seed(run_seed, epoch)`` for per-epoch pairs,
    ``derive_seed(seed, side)`` for the two halves of a twin, and so on. The
    same (parent, keys) always yields the same child, and distinct keys
    yield statistically independent streams.
    """
    entropy = int(parent) & 0xFFFFFFFFFFFFFFFF
    sequence = np.random.SeedSequence(entropy, spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a numpy Generator for ``derive_seed(seed, *keys)``."""
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.default_rng(seed)


def round_half_up(value: float) -> int:
    """Round to the nearest integer with halves going up (0.5 -> 1, 12.5 -> 13)."""
    return int(math.floor(value + 0.5))


def resolve_workers(requested: Optional[int] = None) -> int:
    """
    Number of worker threads/processes to use.

    ``requested`` (None means "all cores") is capped by the WARTEM_THREADS
    environment variable when it is set to a positive integer.
    """
    workers = requested if requested and requested > 0 else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            cap_value = int(cap)
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={cap!r}")
        else:
            if cap_value > 0:
                workers = min(workers, cap_value)
    return max(1, workers)
