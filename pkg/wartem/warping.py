"""
Warping operators and training-pair generation.

Each operator acts on a 4-point focus window ``[p1, p2, p3, p4]`` starting at
index ``w`` and leaves every other value untouched:

    LCW: [p1, p2, p3, p4] -> [p1, p3, p4, p4]            (left copy)
    RCW: [p1, p2, p3, p4] -> [p1, p1, p2, p4]            (right copy)
    LIW: [p1, p2, p3, p4] -> [p1, p3, (p3+p4)/2, p4]     (left interpolation)
    RIW: [p1, p2, p3, p4] -> [p1, (p1+p2)/2, p2, p4]     (right interpolation)

A warped variant applies r such warps in sequence, r drawn from
``0..floor(m/2)``, each on a freshly drawn window of the running series.
Every series then yields two ordered training pairs: ``(L(T), T)`` and
``(T, R(T))``. The left slot never holds a right-warped series and the
right slot never holds a left-warped one.

Example:
    >>> import numpy as np
    >>> from wartem.warping import lcw, make_training_pairs, WarpFamily
    >>> lcw([1.0, 2.0, 3.0, 4.0], 0)
    array([1., 3., 4., 4.])
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ArgumentError, SeriesTooShortError, WarpWindowError
from .series import LabeledDataset

logger = logging.getLogger(__name__)

WINDOW = 4


class WarpDirection(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class WarpFamily(str, Enum):
    """Operator family. MIXED picks copy or interpolation per window, 1/2 each."""

    COPY = "copy"
    INTERPOLATION = "interpolation"
    MIXED = "mixed"


def _window_copy(values: Sequence[float], w: int) -> np.ndarray:
    out = np.array(values, dtype=np.float64, copy=True)
    if out.ndim != 1:
        raise ArgumentError(f"Expected a 1-D series, got shape {out.shape}")
    m = out.shape[0]
    if m < WINDOW:
        raise SeriesTooShortError(m, WINDOW)
    if not 0 <= w <= m - WINDOW:
        raise WarpWindowError(w, m)
    return out


def lcw(values: Sequence[float], w: int) -> np.ndarray:
    """Left copy warp: drop p2, repeat p4."""
    out = _window_copy(values, w)
    p1, p2, p3, p4 = out[w : w + WINDOW].copy()
    out[w : w + WINDOW] = (p1, p3, p4, p4)
    return out


def rcw(values: Sequence[float], w: int) -> np.ndarray:
    """Right copy warp: drop p3, repeat p1."""
    out = _window_copy(values, w)
    p1, p2, p3, p4 = out[w : w + WINDOW].copy()
    out[w : w + WINDOW] = (p1, p1, p2, p4)
    return out


def liw(values: Sequence[float], w: int) -> np.ndarray:
    """Left interpolation warp: drop p2, insert the midpoint of p3 and p4."""
    out = _window_copy(values, w)
    p1, p2, p3, p4 = out[w : w + WINDOW].copy()
    out[w : w + WINDOW] = (p1, p3, (p3 + p4) / 2.0, p4)
    return out


def riw(values: Sequence[float], w: int) -> np.ndarray:
    """Right interpolation warp: drop p3, insert the midpoint of p1 and p2."""
    out = _window_copy(values, w)
    p1, p2, p3, p4 = out[w : w + WINDOW].copy()
    out[w : w + WINDOW] = (p1, (p1 + p2) / 2.0, p2, p4)
    return out


WarpOperator = Callable[[Sequence[float], int], np.ndarray]

OPERATORS: Dict[Tuple[WarpDirection, WarpFamily], WarpOperator] = {
    (WarpDirection.LEFT, WarpFamily.COPY): lcw,
    (WarpDirection.RIGHT, WarpFamily.COPY): rcw,
    (WarpDirection.LEFT, WarpFamily.INTERPOLATION): liw,
    (WarpDirection.RIGHT, WarpFamily.INTERPOLATION): riw,
}


def get_operator(direction: WarpDirection, family: WarpFamily) -> WarpOperator:
    """The single-window operator for a (direction, non-mixed family)."""
    try:
        return OPERATORS[(WarpDirection(direction), WarpFamily(family))]
    except KeyError:
        raise ArgumentError(
            f"No single operator for family {family!r}; pick copy or interpolation"
        ) from None


def max_warp_count(m: int) -> int:
    """Upper bound (inclusive) of the number of warps for a series of length m."""
    return m // 2


def generate_warped_variant(
    values: Sequence[float],
    direction: Union[WarpDirection, str],
    family: Union[WarpFamily, str],
    rng: np.random.Generator,
    count: Optional[int] = None,
    max_warps: Optional[int] = None,
) -> np.ndarray:
    """
    Apply r random single-window warps of one direction, progressively.

    r is drawn uniformly from ``0..max_warps`` (default ``floor(0.5 * m)``)
    unless ``count`` fixes it. For each warp a window start is drawn from
    ``0..m-4``, then for the mixed family the operator family is drawn
    with probability 1/2. ``r = 0`` returns an exact copy.
    """
    direction = WarpDirection(direction)
    family = WarpFamily(family)
    series = np.array(values, dtype=np.float64, copy=True)
    m = series.shape[0]
    if m < WINDOW:
        raise SeriesTooShortError(m, WINDOW)

    if count is None:
        upper = max_warp_count(m) if max_warps is None else min(max_warps, max_warp_count(m))
        if upper < 0:
            raise ArgumentError(f"max_warps must be non-negative, got {max_warps}")
        count = int(rng.integers(0, upper + 1))
    elif count < 0:
        raise ArgumentError(f"Warp count must be non-negative, got {count}")

    for _ in range(count):
        w = int(rng.integers(0, m - WINDOW + 1))
        if family is WarpFamily.MIXED:
            step_family = WarpFamily.COPY if rng.random() < 0.5 else WarpFamily.INTERPOLATION
        else:
            step_family = family
        series = OPERATORS[(direction, step_family)](series, w)
    return series


@dataclass(frozen=True)
class TrainingPair:
    """
    One ordered input pair for the twin auto-encoder.

    ``warped_side`` tells which slot carries the warped variant; the other
    slot holds the original series ``source_index``.
    """

    left_input: np.ndarray
    right_input: np.ndarray
    source_index: int
    warped_side: WarpDirection


def _as_matrix(data: Union[LabeledDataset, np.ndarray]) -> np.ndarray:
    if isinstance(data, LabeledDataset):
        return data.unlabeled()
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2:
        raise ArgumentError(f"Expected an (n, m) series matrix, got shape {matrix.shape}")
    return matrix


def make_training_pairs(
    data: Union[LabeledDataset, np.ndarray],
    family: Union[WarpFamily, str],
    rng: np.random.Generator,
    max_warps: Optional[int] = None,
) -> List[TrainingPair]:
    """
    Two pairs per series, ``(L(T), T)`` and ``(T, R(T))``, in shuffled order.

    Only the series values are read; labels never reach this function.
    """
    matrix = _as_matrix(data)
    pairs: List[TrainingPair] = []
    for index, series in enumerate(matrix):
        original = np.array(series, dtype=np.float64, copy=True)
        left = generate_warped_variant(original, WarpDirection.LEFT, family, rng, max_warps=max_warps)
        right = generate_warped_variant(original, WarpDirection.RIGHT, family, rng, max_warps=max_warps)
        pairs.append(TrainingPair(left, original, index, WarpDirection.LEFT))
        pairs.append(TrainingPair(original, right, index, WarpDirection.RIGHT))
    order = rng.permutation(len(pairs))
    logger.debug(f"Generated {len(pairs)} training pairs from {matrix.shape[0]} series")
    return [pairs[i] for i in order]


def audit_pairs(pairs: Sequence[TrainingPair], data: Union[LabeledDataset, np.ndarray]) -> bool:
    """
    Check the directionality invariant of every pair.

    The unwarped slot must equal the source series exactly, and every index
    must contribute exactly one left-warped and one right-warped pair.
    """
    matrix = _as_matrix(data)
    seen: Dict[int, set] = {}
    for pair in pairs:
        original = matrix[pair.source_index]
        if pair.left_input.shape != original.shape or pair.right_input.shape != original.shape:
            return False
        if pair.warped_side is WarpDirection.LEFT:
            if not np.array_equal(pair.right_input, original):
                return False
        elif not np.array_equal(pair.left_input, original):
            return False
        seen.setdefault(pair.source_index, set()).add(pair.warped_side)
    return len(seen) == matrix.shape[0] and all(len(sides) == 2 for sides in seen.values())


def stack_pairs(pairs: Sequence[TrainingPair]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack pair inputs into ``(B, m)`` left and right matrices."""
    left = np.stack([p.left_input for p in pairs])
    right = np.stack([p.right_input for p in pairs])
    return left, right


def warp_dataset(
    dataset: LabeledDataset,
    direction: Union[WarpDirection, str],
    family: Union[WarpFamily, str],
    rng: np.random.Generator,
    count: Optional[int] = None,
    max_warps: Optional[int] = None,
) -> LabeledDataset:
    """Warp every series of ``dataset``, keeping labels."""
    warped = [
        generate_warped_variant(row, direction, family, rng, count=count, max_warps=max_warps)
        for row in dataset.series
    ]
    return dataset.with_series(np.stack(warped))
