"""
Distances between series and the nearest-neighbor classifier built on them.

Distances:
    - squared Euclidean and Euclidean (vectors of equal length)
    - DTW with squared local cost and no final square root, optionally
      restricted to a Sakoe-Chiba band ``|i - j| <= band``

The scalar kernels are compiled with numba (``nopython``, ``nogil``, no
fastmath), so a distance matrix filled row by row from worker threads is
bitwise identical to calling the scalar function entry by entry.

Example:
    >>> from wartem.metrics import dtw, DistanceKind, one_nn_accuracy
    >>> dtw([1, 2, 2, 3], [1, 2, 3])
    0.0
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numba as nb
import numpy as np

from .exceptions import ArgumentError
from .utils import resolve_workers

logger = logging.getLogger(__name__)

jitkw = {
    "nopython": True,
    "nogil": True,
    "cache": False,
    "fastmath": False,
}


@nb.jit(**jitkw)
def _sq_euclidean_kernel(a, b):
    total = 0.0
    for i in range(a.shape[0]):
        diff = a[i] - b[i]
        total += diff * diff
    return total


@nb.jit(**jitkw)
def _dtw_kernel(a, b, band):
    n = a.shape[0]
    m = b.shape[0]
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        lo = 1
        hi = m
        if band >= 0:
            lo = max(1, i - band)
            hi = min(m, i + band)
        for j in range(lo, hi + 1):
            diff = a[i - 1] - b[j - 1]
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = diff * diff + best
    return acc[n, m]


def _vector(values) -> np.ndarray:
    array = np.ascontiguousarray(values, dtype=np.float64)
    if array.ndim != 1:
        raise ArgumentError(f"Expected a 1-D vector, got shape {array.shape}")
    return array


def squared_euclidean(a: Sequence[float], b: Sequence[float]) -> float:
    """Sum of squared differences of two equal-length vectors."""
    a, b = _vector(a), _vector(b)
    if a.shape != b.shape:
        raise ArgumentError(f"Length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(_sq_euclidean_kernel(a, b))


def euclidean(a: Sequence[float], b: Sequence[float]) -> float:
    return math.sqrt(squared_euclidean(a, b))


def _check_band(band: Optional[int], n: int, m: int) -> int:
    if band is None:
        return -1
    if band < 0:
        raise ArgumentError(f"DTW band must be non-negative, got {band}")
    if band >= max(n, m):
        raise ArgumentError(f"DTW band {band} must be smaller than the series length {max(n, m)}")
    return int(band)


def dtw(a: Sequence[float], b: Sequence[float], band: Optional[int] = None) -> float:
    """
    Dynamic time warping distance with squared local cost.

    ``D(i, j) = (a_i - b_j)^2 + min(D(i-1, j), D(i, j-1), D(i-1, j-1))``
    over monotone, contiguous paths from (0, 0) to (n-1, m-1). ``band``
    (Sakoe-Chiba half-width) restricts cells to ``|i - j| <= band``; when
    the band cannot reach the end cell the distance is infinite.
    """
    a, b = _vector(a), _vector(b)
    if a.shape[0] < 1 or b.shape[0] < 1:
        raise ArgumentError("DTW needs non-empty series")
    return float(_dtw_kernel(a, b, _check_band(band, a.shape[0], b.shape[0])))


class Metric(str, Enum):
    SQUARED_EUCLIDEAN = "sqeuclidean"
    EUCLIDEAN = "euclidean"
    DTW = "dtw"


@dataclass(frozen=True)
class DistanceKind:
    """A distance choice; ``band`` only applies to DTW."""

    metric: Metric
    band: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        if self.band is not None:
            if self.metric is not Metric.DTW:
                raise ArgumentError(f"A band only applies to DTW, not {self.metric.value}")
            if self.band < 0:
                raise ArgumentError(f"DTW band must be non-negative, got {self.band}")

    @classmethod
    def parse(cls, text: str) -> "DistanceKind":
        """Parse ``sqeuclidean``, ``euclidean``, ``dtw`` or ``dtw:<band>``."""
        name, _, band = text.strip().lower().partition(":")
        try:
            metric = Metric(name)
        except ValueError:
            raise ArgumentError(f"Unknown distance: {text!r}") from None
        if band:
            try:
                return cls(metric, int(band))
            except ValueError:
                raise ArgumentError(f"Invalid DTW band in {text!r}") from None
        return cls(metric)

    def __str__(self) -> str:
        if self.band is not None:
            return f"{self.metric.value}:{self.band}"
        return self.metric.value

    def __call__(self, a: Sequence[float], b: Sequence[float]) -> float:
        if self.metric is Metric.SQUARED_EUCLIDEAN:
            return squared_euclidean(a, b)
        if self.metric is Metric.EUCLIDEAN:
            return euclidean(a, b)
        return dtw(a, b, self.band)


SQUARED_EUCLIDEAN = DistanceKind(Metric.SQUARED_EUCLIDEAN)
EUCLIDEAN = DistanceKind(Metric.EUCLIDEAN)
DTW = DistanceKind(Metric.DTW)


def _matrix(vectors, name: str) -> np.ndarray:
    matrix = np.ascontiguousarray(vectors, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1) if matrix.size else matrix.reshape(0, 0)
    if matrix.ndim != 2:
        raise ArgumentError(f"{name} must be a list of vectors, got shape {matrix.shape}")
    return matrix


def distance_matrix(
    queries, refs, kind: DistanceKind = SQUARED_EUCLIDEAN, workers: Optional[int] = None
) -> np.ndarray:
    """
    ``D[i, j] = kind(queries[i], refs[j])``.

    Rows are computed independently (possibly on several threads) so the
    result does not depend on the number of workers.
    """
    q = _matrix(queries, "queries")
    r = _matrix(refs, "refs")
    if kind.metric is not Metric.DTW and q.shape[1] != r.shape[1]:
        raise ArgumentError(f"Dimension mismatch: {q.shape[1]} vs {r.shape[1]}")
    band = -1
    if kind.metric is Metric.DTW:
        band = _check_band(kind.band, q.shape[1], r.shape[1])
    out = np.empty((q.shape[0], r.shape[0]), dtype=np.float64)

    def fill_row(i: int) -> None:
        row = q[i]
        for j in range(r.shape[0]):
            if kind.metric is Metric.DTW:
                out[i, j] = _dtw_kernel(row, r[j], band)
            else:
                out[i, j] = _sq_euclidean_kernel(row, r[j])

    n_workers = min(resolve_workers(workers), max(1, q.shape[0]))
    if n_workers == 1:
        for i in range(q.shape[0]):
            fill_row(i)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill_row, range(q.shape[0])))

    if kind.metric is Metric.EUCLIDEAN:
        np.sqrt(out, out=out)
    logger.debug(f"Computed {out.shape[0]}x{out.shape[1]} {kind} distance matrix")
    return out


@dataclass(frozen=True)
class NNResult:
    predicted_labels: List[int]
    accuracy: float
    distance_evaluations: int


def knn_predict(distances: np.ndarray, train_labels: Sequence[int], k: int = 1) -> np.ndarray:
    """
    Majority label among the k nearest references of each query row.

    Neighbors are ranked by distance, ties broken by lower reference index.
    A vote tie goes to the tied label whose nearest member ranks first, so
    k = 1 is plain nearest-neighbor with lowest-index tie breaking.
    """
    labels = np.asarray(train_labels, dtype=np.int64)
    if distances.shape[1] == 0:
        raise ArgumentError("Empty reference set")
    if not 1 <= k <= distances.shape[1]:
        raise ArgumentError(f"k must lie in 1..{distances.shape[1]}, got {k}")
    if k == 1:
        return labels[np.argmin(distances, axis=1)]
    order = np.argsort(distances, axis=1, kind="stable")[:, :k]
    predictions = np.empty(distances.shape[0], dtype=np.int64)
    for row, neighbors in enumerate(order):
        votes: dict = {}
        for rank, index in enumerate(neighbors):
            label = int(labels[index])
            count, first = votes.get(label, (0, rank))
            votes[label] = (count + 1, first)
        predictions[row] = min(votes, key=lambda lab: (-votes[lab][0], votes[lab][1]))
    return predictions


def one_nn_accuracy(
    train_vectors,
    train_labels: Sequence[int],
    test_vectors,
    test_labels: Sequence[int],
    kind: DistanceKind = SQUARED_EUCLIDEAN,
    workers: Optional[int] = None,
) -> NNResult:
    """Label each test vector with its nearest train vector's label and score it."""
    train = _matrix(train_vectors, "train")
    test = _matrix(test_vectors, "test")
    if train.shape[0] == 0 or len(train_labels) == 0:
        raise ArgumentError("1-NN needs a non-empty training set")
    if len(train_labels) != train.shape[0] or len(test_labels) != test.shape[0]:
        raise ArgumentError("Label count does not match vector count")
    if test.shape[0] == 0:
        raise ArgumentError("1-NN needs a non-empty test set")

    distances = distance_matrix(test, train, kind, workers=workers)
    predicted = knn_predict(distances, train_labels, k=1)
    correct = int(np.sum(predicted == np.asarray(test_labels, dtype=np.int64)))
    return NNResult(
        predicted_labels=[int(p) for p in predicted],
        accuracy=correct / test.shape[0],
        distance_evaluations=int(distances.size),
    )
