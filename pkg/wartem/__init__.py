"""
WaRTEm: time series embeddings that tolerate local warping

Learns fixed-length embeddings of univariate time series that stay close
under local time warping. Every training series is paired with left- and
right-warped variants of itself; a twin convolutional auto-encoder learns
to reconstruct both sides while pulling the two codes together.

Key Features:
- Four window warping operators (left/right copy and interpolation)
- Twin 1-D convolutional auto-encoder with hand-written gradients
- Unsupervised training with held-out early stopping and multi-seed runs
- 1-NN evaluation against Euclidean and DTW baselines (numba kernels)
- Static-classifier evaluation on raw series and embeddings
- UCR TSV datasets, WARTEM1 model files, CSV reports

Example:
    >>> from wartem import load_ucr_tsv, TrainConfig, train, embed_many
    >>> data = load_ucr_tsv("ArrowHead_TRAIN.tsv")
    >>> twin, history = train(data, TrainConfig(family="mixed"))
    >>> vectors = embed_many(twin, data.series)
"""

__version__ = "0.3.0"

from .exceptions import WartemError
from .series import LabeledDataset, holdout_split, load_ucr_tsv, write_ucr_tsv, znormalize
from .warping import (
    TrainingPair,
    WarpDirection,
    WarpFamily,
    generate_warped_variant,
    lcw,
    liw,
    make_training_pairs,
    rcw,
    riw,
)
from .metrics import DistanceKind, distance_matrix, dtw, one_nn_accuracy, squared_euclidean
from .twin import AEConfig, TwinAE, build_twin, embed, embed_many, encode
from .checkpoint import load_twin, save_twin
from .training import TrainConfig, TrainHistory, multi_seed_train, train
from .evaluation import EvalEntry, eval_baseline_nn, eval_wartem_nn, read_report, write_report
from .synthetic import make_warp_benchmark

__all__ = [
    "WartemError",
    # Datasets
    "LabeledDataset",
    "load_ucr_tsv",
    "write_ucr_tsv",
    "znormalize",
    "holdout_split",
    # Warping
    "WarpDirection",
    "WarpFamily",
    "TrainingPair",
    "lcw",
    "rcw",
    "liw",
    "riw",
    "generate_warped_variant",
    "make_training_pairs",
    # Distances
    "DistanceKind",
    "squared_euclidean",
    "dtw",
    "distance_matrix",
    "one_nn_accuracy",
    # Model
    "AEConfig",
    "TwinAE",
    "build_twin",
    "encode",
    "embed",
    "embed_many",
    "save_twin",
    "load_twin",
    # Training and evaluation
    "TrainConfig",
    "TrainHistory",
    "train",
    "multi_seed_train",
    "EvalEntry",
    "eval_wartem_nn",
    "eval_baseline_nn",
    "write_report",
    "read_report",
    "make_warp_benchmark",
]
