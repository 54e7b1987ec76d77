"""
Univariate time-series datasets.

Loads, validates, normalizes and splits datasets stored in the UCR archive's
tab-separated layout (class label first, then the m series values). Series
are held as a read-only ``(n, m)`` float64 matrix; labels are remapped to
contiguous integers ``0..class_count-1`` in first-occurrence order so that
classifier heads can be sized straight from ``class_count``.

Example:
    >>> from wartem.series import load_ucr_tsv, holdout_split
    >>> data = load_ucr_tsv("ArrowHead_TRAIN.tsv")
    >>> train, held_out = holdout_split(data, fraction=0.1, seed=7)
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import (
    ArgumentError,
    DatasetFormatError,
    DatasetParseError,
    DatasetTooSmallError,
    SeriesTooShortError,
    UnknownLabelError,
)
from .utils import round_half_up

logger = logging.getLogger(__name__)

MIN_LENGTH = 4
ZERO_STD = 1e-12

PathLike = Union[str, Path]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LabeledDataset:
    """
    n series of common length m with contiguous integer class labels.

    Attributes
    ----------
    series : np.ndarray
        Read-only ``(n, m)`` float64 matrix, one series per row.
    labels : np.ndarray
        Read-only int64 vector of length n with values in ``[0, class_count)``.
    label_names : tuple of str
        Original label token for each class index (used when writing back).
    name : str
        Free-form dataset name used in reports.
    """

    series: np.ndarray
    labels: np.ndarray
    label_names: Tuple[str, ...] = field(default=())
    name: str = "dataset"

    def __post_init__(self):
        series = np.asarray(self.series, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if series.ndim != 2:
            raise ArgumentError(f"Series matrix must be 2-D, got shape {series.shape}")
        if labels.shape != (series.shape[0],):
            raise ArgumentError(
                f"Got {labels.shape[0] if labels.ndim else 0} labels for {series.shape[0]} series"
            )
        if series.shape[1] < MIN_LENGTH:
            raise SeriesTooShortError(series.shape[1], MIN_LENGTH)
        if not np.all(np.isfinite(series)):
            raise ArgumentError("Dataset contains NaN or infinite values")
        if labels.size and labels.min() < 0:
            raise ArgumentError("Labels must be non-negative")
        names = tuple(self.label_names)
        class_count = int(labels.max()) + 1 if labels.size else 0
        if not names:
            names = tuple(str(i) for i in range(class_count))
        elif len(names) < class_count:
            raise ArgumentError(
                f"{len(names)} label names for {class_count} classes"
            )
        object.__setattr__(self, "series", _frozen(series))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "label_names", names)

    @property
    def n(self) -> int:
        return int(self.series.shape[0])

    @property
    def m(self) -> int:
        return int(self.series.shape[1])

    @property
    def class_count(self) -> int:
        return len(self.label_names)

    def __len__(self) -> int:
        return self.n

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        """Rows ``indices`` (in the given order) as a new dataset with the same classes."""
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            series=self.series[idx],
            labels=self.labels[idx],
            label_names=self.label_names,
            name=self.name,
        )

    def unlabeled(self) -> np.ndarray:
        """The read-only series matrix without labels (what training sees)."""
        return self.series

    def with_series(self, series: np.ndarray) -> "LabeledDataset":
        """Same labels, new series values (e.g. after normalizing or warping)."""
        return LabeledDataset(
            series=series,
            labels=self.labels,
            label_names=self.label_names,
            name=self.name,
        )


def _parse_label(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DatasetParseError(line_no, 0, token) from None
    if not math.isfinite(value) or value != math.floor(value):
        raise DatasetParseError(line_no, 0, token)
    return value


def load_ucr_tsv(
    path: PathLike,
    name: Optional[str] = None,
    label_names: Optional[Sequence[str]] = None,
) -> LabeledDataset:
    """
    Load a UCR-format tab-separated file.

    Each non-blank line holds the class label followed by the m series values.
    Labels are remapped to ``0..class_count-1`` in order of first appearance.
    Pass ``label_names`` (e.g. ``train.label_names``) to number a test split
    against the classes of its training split instead.

    Raises:
        DatasetFormatError: a row's arity differs from the first row's.
        DatasetParseError: a field is not a number (or the label is not integral).
        DatasetTooSmallError: fewer than 2 rows, or m < 4.
        UnknownLabelError: a label is missing from ``label_names``.
    """
    path = Path(path)
    logger.debug(f"Loading UCR dataset from {path}")
    rows: List[List[float]] = []
    raw_labels: List[float] = []
    label_tokens: dict = {}
    arity = None

    known = None
    if label_names is not None:
        known = {}
        for index, token in enumerate(label_names):
            known.setdefault(_parse_label(token, 0), index)

    with open(path, "r", encoding="utf-8", newline="") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if arity is None:
                arity = len(fields)
            elif len(fields) != arity:
                raise DatasetFormatError(line_no, arity, len(fields))

            label = _parse_label(fields[0].strip(), line_no)
            if known is not None and label not in known:
                raise UnknownLabelError(line_no, fields[0].strip(), label_names)
            values = []
            for index, token in enumerate(fields[1:], start=1):
                try:
                    value = float(token)
                except ValueError:
                    raise DatasetParseError(line_no, index, token) from None
                if not math.isfinite(value):
                    raise DatasetParseError(line_no, index, token)
                values.append(value)
            rows.append(values)
            raw_labels.append(label)
            label_tokens.setdefault(label, fields[0].strip())

    if len(rows) < 2:
        raise DatasetTooSmallError(f"{path} has {len(rows)} rows; at least 2 are required")
    m = arity - 1
    if m < MIN_LENGTH:
        raise DatasetTooSmallError(f"{path} has series of length {m}; at least {MIN_LENGTH} required")

    if known is not None:
        mapping = known
        names = tuple(label_names)
    else:
        mapping = {}
        for label in raw_labels:
            mapping.setdefault(label, len(mapping))
        names = tuple(label_tokens[label] for label in mapping)
    labels = np.array([mapping[label] for label in raw_labels], dtype=np.int64)

    dataset = LabeledDataset(
        series=np.array(rows, dtype=np.float64),
        labels=labels,
        label_names=names,
        name=name or path.stem,
    )
    logger.info(
        f"Loaded {dataset.n} series of length {dataset.m} "
        f"with {dataset.class_count} classes from {path}"
    )
    return dataset


def format_value(value: float) -> str:
    """17 significant digits: enough for a bit-exact float64 round trip."""
    return format(float(value), ".17g")


def write_ucr_tsv(dataset: LabeledDataset, path: PathLike) -> None:
    """Write ``dataset`` in UCR layout, restoring the original label tokens."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for label, row in zip(dataset.labels, dataset.series):
            fields = [dataset.label_names[int(label)]]
            fields.extend(format_value(v) for v in row)
            f.write("\t".join(fields) + "\n")
    logger.debug(f"Wrote {dataset.n} series to {path}")


def znormalize(values: Sequence[float]) -> np.ndarray:
    """
    Shift to mean 0 and scale to population standard deviation 1.

    Series whose standard deviation is below 1e-12 map to all zeros. Any
    non-empty finite series is accepted; only warping needs length >= 4.
    """
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1 or array.size == 0:
        raise ArgumentError(f"Cannot normalize an array of shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ArgumentError("Time series contains NaN or infinite values")
    std = array.std()
    if std < ZERO_STD:
        return np.zeros_like(array)
    return (array - array.mean()) / std


def znormalize_dataset(dataset: LabeledDataset) -> LabeledDataset:
    """Apply :func:`znormalize` to every series of ``dataset``."""
    return dataset.with_series(np.stack([znormalize(row) for row in dataset.series]))


def split_indices(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Deterministic disjoint partition of ``range(n)`` into (kept, held-out).

    The held-out part has ``max(1, round(fraction * n))`` indices. Both index
    vectors are returned sorted so row order inside each part follows the
    original dataset order.
    """
    if not 0.0 < fraction < 1.0:
        raise ArgumentError(f"Hold-out fraction must lie in (0, 1), got {fraction}")
    if n < 2:
        raise DatasetTooSmallError(f"Cannot split {n} series; at least 2 are required")
    held = max(1, round_half_up(fraction * n))
    if held >= n:
        raise DatasetTooSmallError(
            f"Hold-out of {held} series leaves nothing to train on (n={n})"
        )
    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[held:]), np.sort(order[:held])


def holdout_split(
    dataset: LabeledDataset, fraction: float, seed: int
) -> Tuple[LabeledDataset, LabeledDataset]:
    """Split ``dataset`` into (kept, held-out) parts; see :func:`split_indices`."""
    kept, held = split_indices(dataset.n, fraction, seed)
    return dataset.subset(kept), dataset.subset(held)
