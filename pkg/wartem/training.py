"""
Unsupervised training of the twin auto-encoder.

Each epoch turns every training series into its two warped pairs
(regenerated per epoch from ``make_rng(seed, EPOCH_PAIRS_KEY, epoch)`` unless frozen),
runs mini-batch Adam over all four networks, then scores a fixed set of
held-out pairs. Training stops once the held-out total loss has not improved
for ``patience`` consecutive epochs, and the parameters of the best epoch
are restored.

Labels never reach this module's training loop: only the series matrix of a
dataset is read.

Example:
    >>> from wartem.training import TrainConfig, train
    >>> twin, history = train(dataset, TrainConfig(family="mixed", max_epochs=50))
    >>> history.best_epoch, history.best_holdout_loss
"""

import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .autodiff import AdamState, adam_step
from .exceptions import (
    ArgumentError,
    DatasetTooSmallError,
    DivergenceError,
    InvalidConfigValueError,
    TrainingRunError,
    WartemError,
)
from .series import LabeledDataset, format_value, split_indices
from .twin import (
    DEFAULT_BLOCKS,
    AEConfig,
    TwinAE,
    build_twin,
    twin_backward,
    twin_forward,
)
from .utils import derive_seed, make_rng, resolve_workers
from .warping import WarpFamily, make_training_pairs, stack_pairs

logger = logging.getLogger(__name__)

# Sub-stream keys under a run seed (twin initialization uses 0 and 1)
SPLIT_KEY = 2
HOLDOUT_PAIRS_KEY = 3
EPOCH_PAIRS_KEY = 4


@dataclass(frozen=True)
class TrainConfig:
    family: WarpFamily
    loss_weight: float = 1.0
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 20
    holdout_fraction: float = 0.1
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    regenerate_pairs: bool = True
    max_warps: Optional[int] = None
    code_length: Optional[int] = None
    conv_blocks: Tuple[Tuple[int, int], ...] = DEFAULT_BLOCKS
    pool_size: int = 2
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "family", WarpFamily(self.family))
        if self.batch_size < 1:
            raise InvalidConfigValueError("batch_size", self.batch_size, "must be at least 1")
        if self.max_epochs < 1:
            raise InvalidConfigValueError("max_epochs", self.max_epochs, "must be at least 1")
        if self.patience < 1:
            raise InvalidConfigValueError("patience", self.patience, "must be at least 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise InvalidConfigValueError(
                "holdout_fraction", self.holdout_fraction, "must lie in (0, 1)"
            )
        if not self.learning_rate > 0:
            raise InvalidConfigValueError("learning_rate", self.learning_rate, "must be positive")
        if self.max_warps is not None and self.max_warps < 0:
            raise InvalidConfigValueError("max_warps", self.max_warps, "must be non-negative")

    def ae_config(self, input_length: int) -> AEConfig:
        return AEConfig(
            input_length=input_length,
            code_length=self.code_length,
            conv_blocks=self.conv_blocks,
            pool_size=self.pool_size,
            activation=self.activation,
            loss_weight=self.loss_weight,
        )


@dataclass(frozen=True)
class EpochRecord:
    """Per-pair averages over one epoch (l1..l3 are training-set averages)."""

    epoch: int
    train_total: float
    holdout_total: float
    l1: float
    l2: float
    l3: float


HISTORY_FIELDS = ("epoch", "train_total", "holdout_total", "l1", "l2", "l3")


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    @property
    def best_holdout_loss(self) -> float:
        if not self.best_epoch:
            return math.inf
        return self.records[self.best_epoch - 1].holdout_total

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(HISTORY_FIELDS)
            for record in self.records:
                writer.writerow(
                    [record.epoch] + [format_value(getattr(record, k)) for k in HISTORY_FIELDS[1:]]
                )
        return path


def read_history_csv(path: Union[str, Path]) -> TrainHistory:
    """Inverse of :meth:`TrainHistory.to_csv`; best epoch is the first holdout minimum."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            records.append(
                EpochRecord(
                    epoch=int(row["epoch"]),
                    **{k: float(row[k]) for k in HISTORY_FIELDS[1:]},
                )
            )
    history = TrainHistory(records=records)
    if records:
        history.stopped_epoch = records[-1].epoch
        best = min(records, key=lambda r: (r.holdout_total, r.epoch))
        history.best_epoch = best.epoch
    return history


class EarlyStopping:
    """
    Patience rule over any loss stream.

    A loss counts as an improvement only when strictly lower than the best so
    far. After ``patience`` consecutive non-improving epochs :meth:`update`
    returns True. With ``params`` supplied, a copy of the parameters at the
    best epoch is kept in ``best_params``.
    """

    def __init__(self, patience: int):
        if patience < 1:
            raise ArgumentError(f"patience must be at least 1, got {patience}")
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = 0
        self.best_params: Optional[List[np.ndarray]] = None
        self.wait = 0
        self.stopped_epoch: Optional[int] = None

    def update(self, epoch: int, loss: float, params: Optional[Sequence[np.ndarray]] = None) -> bool:
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.wait = 0
            if params is not None:
                self.best_params = [np.array(p, copy=True) for p in params]
        else:
            self.wait += 1
        if self.wait >= self.patience:
            self.stopped_epoch = epoch
            logger.info(
                f"Early stopping at epoch {epoch}; best held-out loss "
                f"{self.best_loss:.6g} at epoch {self.best_epoch}"
            )
            return True
        return False


EpochCallback = Callable[[int, EpochRecord, TwinAE], None]


def _series_matrix(data: Union[LabeledDataset, np.ndarray]) -> np.ndarray:
    if isinstance(data, LabeledDataset):
        return data.unlabeled()
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2:
        raise ArgumentError(f"Expected an (n, m) series matrix, got shape {matrix.shape}")
    return matrix


def _holdout_losses(twin: TwinAE, left: np.ndarray, right: np.ndarray, batch_size: int) -> float:
    total = 0.0
    for start in range(0, left.shape[0], batch_size):
        stop = start + batch_size
        losses, _ = twin_forward(twin, (left[start:stop], right[start:stop]))
        total += losses.total * (min(stop, left.shape[0]) - start)
    return total / left.shape[0]


def train(
    data: Union[LabeledDataset, np.ndarray],
    config: TrainConfig,
    on_epoch_end: Optional[EpochCallback] = None,
) -> Tuple[TwinAE, TrainHistory]:
    """
    Train one twin auto-encoder and return it at its best held-out epoch.

    Raises:
        DatasetTooSmallError: fewer than 3 series.
        DivergenceError: a batch (or the held-out evaluation) produced a
            non-finite loss.
    """
    matrix = _series_matrix(data)
    n, m = matrix.shape
    if n < 3:
        raise DatasetTooSmallError(f"Training needs at least 3 series, got {n}")

    kept, held = split_indices(n, config.holdout_fraction, derive_seed(config.seed, SPLIT_KEY))
    train_series = matrix[kept]
    holdout_series = matrix[held]

    twin = build_twin(config.ae_config(m), config.seed)
    params = twin.parameters()
    adam = AdamState.for_parameters(
        params,
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
    )

    holdout_left, holdout_right = stack_pairs(
        make_training_pairs(
            holdout_series,
            config.family,
            make_rng(config.seed, HOLDOUT_PAIRS_KEY),
            max_warps=config.max_warps,
        )
    )
    frozen_pairs = None
    if not config.regenerate_pairs:
        frozen_pairs = stack_pairs(
            make_training_pairs(
                train_series,
                config.family,
                make_rng(config.seed, EPOCH_PAIRS_KEY, 0),
                max_warps=config.max_warps,
            )
        )

    logger.info(
        f"Training twin auto-encoder (seed {config.seed}, family {config.family.value}) on "
        f"{len(kept)} series of length {m}, {len(held)} held out"
    )

    stopper = EarlyStopping(config.patience)
    history = TrainHistory()
    for epoch in range(1, config.max_epochs + 1):
        if frozen_pairs is not None:
            left, right = frozen_pairs
        else:
            left, right = stack_pairs(
                make_training_pairs(
                    train_series,
                    config.family,
                    make_rng(config.seed, EPOCH_PAIRS_KEY, epoch),
                    max_warps=config.max_warps,
                )
            )

        sums = np.zeros(4)
        for batch_index, start in enumerate(range(0, left.shape[0], config.batch_size)):
            stop = start + config.batch_size
            losses, tape = twin_forward(twin, (left[start:stop], right[start:stop]))
            if not math.isfinite(losses.total):
                raise DivergenceError(epoch, batch_index, losses.total)
            grads = twin_backward(twin, tape).flat()
            adam_step(params, grads, adam)
            size = min(stop, left.shape[0]) - start
            sums += size * np.array([losses.total, losses.l1, losses.l2, losses.l3])
        train_total, l1, l2, l3 = (sums / left.shape[0]).tolist()

        holdout_total = _holdout_losses(twin, holdout_left, holdout_right, config.batch_size)
        if not math.isfinite(holdout_total):
            raise DivergenceError(epoch, "holdout", holdout_total)

        record = EpochRecord(epoch, train_total, holdout_total, l1, l2, l3)
        history.records.append(record)
        logger.info(
            f"Epoch {epoch}: train {train_total:.6g} held-out {holdout_total:.6g} "
            f"(l1 {l1:.4g}, l2 {l2:.4g}, l3 {l3:.4g})"
        )
        stop_now = stopper.update(epoch, holdout_total, params)
        if on_epoch_end is not None:
            on_epoch_end(epoch, record, twin)
        if stop_now:
            break

    history.stopped_epoch = history.records[-1].epoch
    history.best_epoch = stopper.best_epoch
    twin.load_parameters(stopper.best_params)
    return twin, history


def _train_worker(matrix: np.ndarray, config: TrainConfig):
    # Exceptions with custom __init__ signatures do not survive pickling,
    # so failures travel back as messages.
    try:
        return train(matrix, config), None
    except WartemError as e:
        return None, f"{type(e).__name__}: {e}"


def multi_seed_train(
    data: Union[LabeledDataset, np.ndarray],
    config: TrainConfig,
    seeds: Sequence[int],
    workers: Optional[int] = None,
) -> List[Tuple[TwinAE, TrainHistory]]:
    """
    One independent :func:`train` run per seed, results in seed order.

    Runs go to a process pool when more than one worker is available; the
    outcome does not depend on the worker count.

    Raises:
        TrainingRunError: tagged with the seed of the first failing run.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ArgumentError("multi_seed_train needs at least one seed")
    matrix = np.array(_series_matrix(data), copy=True)
    configs = [dataclasses.replace(config, seed=s) for s in seeds]
    n_workers = min(resolve_workers(workers), len(seeds))

    results = []
    if n_workers == 1:
        for cfg in configs:
            try:
                results.append(train(matrix, cfg))
            except WartemError as e:
                raise TrainingRunError(cfg.seed, e) from e
        return results

    logger.info(f"Training {len(seeds)} seeds on {n_workers} worker processes")
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        outcomes = list(pool.map(_train_worker, [matrix] * len(configs), configs))
    for cfg, (result, error) in zip(configs, outcomes):
        if error is not None:
            raise TrainingRunError(cfg.seed, error)
        results.append(result)
    return results
