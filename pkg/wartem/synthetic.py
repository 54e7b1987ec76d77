"""
Synthetic warped-shape benchmark.

Every class has its own smooth base shape (``sin(2 pi (c + 1) x)`` on
``x in [0, 1)``, so class c completes c + 1 cycles). Each instance is its
class shape warped by up to ``max_warps`` random mixed-family warps (left or
right at random) plus a little Gaussian amplitude jitter. Instances are
split into train and test parts.

Example:
    >>> from wartem.synthetic import make_warp_benchmark
    >>> train, test = make_warp_benchmark(n=200, m=64, class_count=2, max_warps=20, seed=0)
"""

import logging
from typing import Tuple

import numpy as np

from .exceptions import ArgumentError
from .series import MIN_LENGTH, LabeledDataset, split_indices
from .utils import derive_seed, make_rng
from .warping import WarpDirection, WarpFamily, generate_warped_variant

logger = logging.getLogger(__name__)

BENCHMARK_NAME = "WarpBenchmark"


def base_shape(class_index: int, m: int) -> np.ndarray:
    x = np.arange(m) / m
    return np.sin(2.0 * np.pi * (class_index + 1) * x)


def make_warp_benchmark(
    n: int = 200,
    m: int = 64,
    class_count: int = 2,
    max_warps: int = 20,
    seed: int = 0,
    test_fraction: float = 0.5,
    jitter: float = 0.05,
) -> Tuple[LabeledDataset, LabeledDataset]:
    """Return (train, test) datasets; classes are balanced before the split."""
    if class_count < 2:
        raise ArgumentError(f"class_count must be at least 2, got {class_count}")
    if n < 2 * class_count:
        raise ArgumentError(f"n={n} is too small for {class_count} classes")
    if m < MIN_LENGTH:
        raise ArgumentError(f"m must be at least {MIN_LENGTH}, got {m}")
    if max_warps < 0 or jitter < 0:
        raise ArgumentError("max_warps and jitter must be non-negative")

    rng = make_rng(seed, 0)
    shapes = [base_shape(c, m) for c in range(class_count)]
    labels = np.arange(n) % class_count
    rng.shuffle(labels)

    rows = []
    for label in labels:
        direction = WarpDirection.LEFT if rng.random() < 0.5 else WarpDirection.RIGHT
        warped = generate_warped_variant(
            shapes[label], direction, WarpFamily.MIXED, rng, max_warps=max_warps
        )
        rows.append(warped + rng.normal(0.0, jitter, size=m))

    dataset = LabeledDataset(
        series=np.stack(rows),
        labels=labels,
        label_names=tuple(str(c + 1) for c in range(class_count)),
        name=BENCHMARK_NAME,
    )
    kept, held = split_indices(n, test_fraction, derive_seed(seed, 1))
    logger.info(
        f"Generated {n} benchmark series (m={m}, {class_count} classes, "
        f"up to {max_warps} warps): {len(kept)} train / {len(held)} test"
    )
    return dataset.subset(kept), dataset.subset(held)
