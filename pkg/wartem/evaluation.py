"""
Evaluation protocols and report files.

Nearest-neighbor protocols:
    wartem-nn   1-NN (squared Euclidean) on twin embeddings, one accuracy
                per trained model, reported as mean +- population std
    eucl-nn     1-NN on raw series under Euclidean distance
    dtw-nn      1-NN on raw series under DTW (optionally banded)

Static-classifier protocols (three dense layers sized
``max(10, L // 10)``, 50 and class_count):
    dl          trained on raw series
    wartem-dl   trained on embeddings, once per model

Each static-classifier evaluation trains ``trials`` times and keeps the best
test accuracy. That choice looks at the test set, so such rows are flagged
``optimistic-selection`` and also carry the mean over trials.

Example:
    >>> from wartem.evaluation import eval_baseline_nn, write_report
    >>> from wartem.metrics import DTW
    >>> entry = eval_baseline_nn(train, test, DTW)
    >>> write_report([entry], "report.csv")
"""

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .autodiff import (
    AdamState,
    Dense,
    GradientTape,
    Relu,
    Sequential,
    adam_step,
    softmax_cross_entropy,
    softmax_cross_entropy_grad,
)
from .exceptions import ArgumentError, EvaluationError
from .metrics import EUCLIDEAN, SQUARED_EUCLIDEAN, DistanceKind, Metric, one_nn_accuracy
from .series import LabeledDataset, format_value, split_indices
from .training import EarlyStopping
from .twin import TwinAE, embed_many
from .utils import derive_seed, make_rng

logger = logging.getLogger(__name__)

OPTIMISTIC = "optimistic-selection"

MODES = ("wartem-nn", "eucl-nn", "dtw-nn", "wartem-dl", "dl")


@dataclass(frozen=True)
class EvalEntry:
    """
    One row of an evaluation report.

    ``accuracies`` holds one percentage per model (or a single value for
    deterministic baselines); ``std`` is the population standard deviation
    for multi-model methods and None otherwise.
    """

    dataset: str
    method: str
    accuracies: Tuple[float, ...]
    mean: float
    std: Optional[float] = None
    seeds: int = 1
    config_hash: str = ""
    note: str = ""
    trial_mean: Optional[float] = None
    best: bool = False


def _summarize(
    dataset: str,
    method: str,
    accuracies: Sequence[float],
    multi_seed: bool,
    **extra,
) -> EvalEntry:
    values = tuple(float(a) for a in accuracies)
    return EvalEntry(
        dataset=dataset,
        method=method,
        accuracies=values,
        mean=float(np.mean(values)),
        std=float(np.std(values)) if multi_seed else None,
        seeds=len(values),
        **extra,
    )


def _check_model(twin: TwinAE, *datasets: LabeledDataset) -> None:
    for data in datasets:
        if data.m != twin.config.input_length:
            raise EvaluationError(
                f"Model expects series of length {twin.config.input_length}, "
                f"dataset {data.name!r} has length {data.m}"
            )


def _check_classes(train: LabeledDataset, test: LabeledDataset) -> None:
    """Test labels must index the train classes under the same label names."""
    for index in np.unique(test.labels):
        index = int(index)
        if index >= train.class_count or train.label_names[index] != test.label_names[index]:
            raise EvaluationError(
                f"Test class {test.label_names[index]!r} (index {index}) does not match the train "
                f"classes {list(train.label_names)}; load the test split with the train label names"
            )


def eval_wartem_nn(
    models: Sequence[TwinAE],
    train: LabeledDataset,
    test: LabeledDataset,
    config_hash: str = "",
    workers: Optional[int] = None,
) -> EvalEntry:
    """1-NN accuracy in embedding space, once per model."""
    if not models:
        raise ArgumentError("wartem-nn needs at least one model")
    _check_classes(train, test)
    accuracies = []
    for index, twin in enumerate(models):
        _check_model(twin, train, test)
        result = one_nn_accuracy(
            embed_many(twin, train.series),
            train.labels,
            embed_many(twin, test.series),
            test.labels,
            SQUARED_EUCLIDEAN,
            workers=workers,
        )
        accuracies.append(100.0 * result.accuracy)
        logger.debug(f"wartem-nn model {index}: {accuracies[-1]:.2f}%")
    return _summarize(test.name, "wartem-nn", accuracies, True, config_hash=config_hash)


def baseline_method(kind: DistanceKind) -> str:
    if kind.metric is Metric.DTW:
        return "dtw-nn" if kind.band is None else f"dtw-nn:{kind.band}"
    return "eucl-nn"


def eval_baseline_nn(
    train: LabeledDataset,
    test: LabeledDataset,
    kind: DistanceKind = EUCLIDEAN,
    workers: Optional[int] = None,
) -> EvalEntry:
    """Deterministic 1-NN accuracy on the raw series."""
    _check_classes(train, test)
    if kind.metric is not Metric.DTW and train.m != test.m:
        raise EvaluationError(f"Train length {train.m} differs from test length {test.m}")
    result = one_nn_accuracy(
        train.series, train.labels, test.series, test.labels, kind, workers=workers
    )
    return _summarize(test.name, baseline_method(kind), [100.0 * result.accuracy], False)


# --- Static classifier ---


def hidden_sizes(feature_count: int, class_count: int) -> Tuple[int, int, int]:
    return max(10, feature_count // 10), 50, class_count


@dataclass(frozen=True)
class ClassifierConfig:
    max_epochs: int = 300
    patience: int = 20
    holdout_fraction: float = 0.1
    batch_size: int = 32
    learning_rate: float = 1e-3
    trials: int = 10

    def __post_init__(self):
        if self.max_epochs < 1 or self.patience < 1 or self.batch_size < 1 or self.trials < 1:
            raise ArgumentError("Classifier epochs, patience, batch size and trials must be positive")


class StaticClassifier:
    """Dense -> ReLU -> Dense(50) -> ReLU -> Dense(class_count), softmax output."""

    def __init__(self, feature_count: int, class_count: int):
        if class_count < 1:
            raise ArgumentError(f"class_count must be positive, got {class_count}")
        first, second, out = hidden_sizes(feature_count, class_count)
        self.feature_count = feature_count
        self.class_count = class_count
        self.network = Sequential(
            [Dense(feature_count, first), Relu(), Dense(first, second), Relu(), Dense(second, out)]
        )

    def logits(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.feature_count:
            raise EvaluationError(
                f"Classifier expects {self.feature_count} features, got shape {x.shape}"
            )
        return self.network.forward(x)

    def predict(self, features) -> np.ndarray:
        return np.argmax(self.logits(features), axis=1)


def train_static_classifier(
    features,
    labels: Sequence[int],
    class_count: int,
    config: ClassifierConfig = ClassifierConfig(),
    seed: int = 0,
) -> StaticClassifier:
    """
    Fit the classifier by mini-batch Adam on softmax cross-entropy.

    A held-out slice of the features (when there are at least 3 rows)
    drives early stopping; the best held-out epoch is restored.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ArgumentError(f"Features {x.shape} do not match {y.shape[0]} labels")
    if y.size and (y.min() < 0 or y.max() >= class_count):
        raise ArgumentError(f"Labels must lie in 0..{class_count - 1}")

    classifier = StaticClassifier(x.shape[1], class_count)
    classifier.network.initialize(make_rng(seed, 0))
    params = classifier.network.parameters()
    adam = AdamState.for_parameters(params, learning_rate=config.learning_rate)
    rng = make_rng(seed, 1)

    if x.shape[0] >= 3:
        kept, held = split_indices(x.shape[0], config.holdout_fraction, derive_seed(seed, 2))
    else:
        kept, held = np.arange(x.shape[0]), np.arange(0)
    stopper = EarlyStopping(config.patience) if held.size else None

    for epoch in range(1, config.max_epochs + 1):
        order = kept[rng.permutation(kept.size)]
        for start in range(0, order.size, config.batch_size):
            batch = order[start : start + config.batch_size]
            tape = GradientTape()
            logits = classifier.network.forward(x[batch], tape)
            _, grads = classifier.network.backward(tape, softmax_cross_entropy_grad(logits, y[batch]))
            adam_step(params, grads, adam)
        if stopper is not None:
            loss = softmax_cross_entropy(classifier.network.forward(x[held]), y[held])
            if stopper.update(epoch, loss, params):
                break

    if stopper is not None and stopper.best_params is not None:
        for p, best in zip(params, stopper.best_params):
            p[...] = best
    return classifier


def eval_static(classifier: StaticClassifier, features, labels: Sequence[int]) -> float:
    """Test accuracy in percent."""
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise ArgumentError("Cannot score an empty test set")
    return 100.0 * float(np.mean(classifier.predict(features) == y))


def _trial_accuracies(
    train_x, train_y, test_x, test_y, class_count: int, config: ClassifierConfig, seed: int
) -> List[float]:
    return [
        eval_static(
            train_static_classifier(train_x, train_y, class_count, config, derive_seed(seed, t)),
            test_x,
            test_y,
        )
        for t in range(config.trials)
    ]


def eval_dl(
    train: LabeledDataset,
    test: LabeledDataset,
    config: ClassifierConfig = ClassifierConfig(),
    seed: int = 0,
) -> EvalEntry:
    """Static classifier on raw series: best and mean over ``config.trials`` trainings."""
    _check_classes(train, test)
    if train.m != test.m:
        raise EvaluationError(f"Train length {train.m} differs from test length {test.m}")
    trials = _trial_accuracies(
        train.series, train.labels, test.series, test.labels, train.class_count, config, seed
    )
    return _summarize(
        test.name,
        "dl",
        [max(trials)],
        False,
        note=OPTIMISTIC,
        trial_mean=float(np.mean(trials)),
    )


def eval_wartem_dl(
    models: Sequence[TwinAE],
    train: LabeledDataset,
    test: LabeledDataset,
    config: ClassifierConfig = ClassifierConfig(),
    seed: int = 0,
    config_hash: str = "",
) -> EvalEntry:
    """Static classifier on embeddings: best-of-trials accuracy per model."""
    if not models:
        raise ArgumentError("wartem-dl needs at least one model")
    _check_classes(train, test)
    best, every = [], []
    for twin in models:
        _check_model(twin, train, test)
        trials = _trial_accuracies(
            embed_many(twin, train.series),
            train.labels,
            embed_many(twin, test.series),
            test.labels,
            train.class_count,
            config,
            seed,
        )
        best.append(max(trials))
        every.extend(trials)
    return _summarize(
        test.name,
        "wartem-dl",
        best,
        True,
        config_hash=config_hash,
        note=OPTIMISTIC,
        trial_mean=float(np.mean(every)),
    )


def select_best_family(entries: Mapping[str, EvalEntry]) -> Tuple[str, EvalEntry]:
    """
    Pick the warp family with the highest wartem-nn mean.

    Returns the family name and its entry renamed to ``wartem-nn`` with the
    family recorded in the note. Ties go to the first family in ``entries``.
    """
    if not entries:
        raise ArgumentError("No family results to compare")
    for family, entry in entries.items():
        logger.info(f"wartem-nn family {family}: {entry.mean:.2f}")
    family = max(entries, key=lambda name: entries[name].mean)
    entry = entries[family]
    note = f"family={family}" + (f";{entry.note}" if entry.note else "")
    return family, dataclasses.replace(entry, method="wartem-nn", note=note)


# --- Report files ---

REPORT_FIELDS = (
    "dataset",
    "method",
    "mean",
    "std",
    "seeds",
    "accuracies",
    "trial_mean",
    "best",
    "config_hash",
    "note",
)


def flag_best(entries: Sequence[EvalEntry]) -> List[EvalEntry]:
    """Mark, per dataset, every entry whose mean equals the dataset maximum."""
    top: Dict[str, float] = {}
    for entry in entries:
        top[entry.dataset] = max(top.get(entry.dataset, -math.inf), entry.mean)
    return [dataclasses.replace(e, best=e.mean == top[e.dataset]) for e in entries]


def _optional(value: Optional[float]) -> str:
    return "" if value is None else format_value(value)


def _entry_row(entry: EvalEntry) -> List[str]:
    return [
        entry.dataset,
        entry.method,
        format_value(entry.mean),
        _optional(entry.std),
        str(entry.seeds),
        ";".join(format_value(a) for a in entry.accuracies),
        _optional(entry.trial_mean),
        "1" if entry.best else "0",
        entry.config_hash,
        entry.note,
    ]


def format_table(entries: Sequence[EvalEntry]) -> str:
    """Aligned, human-readable table; best rows carry a ``*``."""
    header = ["dataset", "method", "accuracy", "trial mean", "seeds", "note"]
    rows = []
    for e in entries:
        accuracy = f"{e.mean:.2f}" + (f" +- {e.std:.2f}" if e.std is not None else "")
        rows.append(
            [
                e.dataset,
                e.method + (" *" if e.best else ""),
                accuracy,
                "" if e.trial_mean is None else f"{e.trial_mean:.2f}",
                str(e.seeds),
                e.note,
            ]
        )
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in [header] + rows]
    return "\n".join(lines) + "\n"


def table_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".txt")


def write_report(
    entries: Sequence[EvalEntry], path: Union[str, Path], append: bool = False
) -> List[EvalEntry]:
    """
    Write the CSV report and its aligned text table (same stem, ``.txt``).

    With ``append`` the rows already in ``path`` are kept, and the best
    method per dataset is re-flagged over all rows. Returns the rows written.
    """
    if not entries:
        raise ArgumentError("Refusing to write an empty report")
    path = Path(path)
    existing = read_report(path) if append and path.exists() else []
    rows = flag_best(list(existing) + list(entries))
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(REPORT_FIELDS)
        for entry in rows:
            writer.writerow(_entry_row(entry))
    table_path(path).write_text(format_table(rows), encoding="utf-8")
    logger.info(f"Wrote {len(rows)} report rows to {path}")
    return rows


def read_report(path: Union[str, Path]) -> List[EvalEntry]:
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            entries.append(
                EvalEntry(
                    dataset=row["dataset"],
                    method=row["method"],
                    accuracies=tuple(float(a) for a in row["accuracies"].split(";") if a),
                    mean=float(row["mean"]),
                    std=float(row["std"]) if row["std"] else None,
                    seeds=int(row["seeds"]),
                    config_hash=row["config_hash"],
                    note=row["note"],
                    trial_mean=float(row["trial_mean"]) if row["trial_mean"] else None,
                    best=row["best"] == "1",
                )
            )
    return entries
