"""
Twin convolutional auto-encoder.

Two structurally identical, parameter-independent auto-encoders take the
two slots of a training pair. Their losses:

    l1 = mse(left_decoder(R1), left_input)
    l2 = mse(right_decoder(R2), right_input)
    l3 = ||R1 - R2||^2          (R1, R2 are the encoder codes)
    total = l1 + l2 + lambda * l3

l3 flows back through the encoders only; decoder gradients come from l1
(left) and l2 (right) alone. The embedding of a series is the average of
its left and right codes.

Default architecture for input length m and code length d = round(0.2 m):

    encoder: [Conv1d(1->16, k5) ReLU MaxPool(2)] [Conv1d(16->32, k5) ReLU MaxPool(2)]
             Dense(32*ceil(m/4) -> d)
    decoder: Dense(d -> 32*ceil(m/4)) Reshape
             [Upsample(2) Conv1d(32->16, k5) ReLU] [Upsample(2) Conv1d(16->16, k5) ReLU]
             Crop(m) Conv1d(16->1, k5)   (linear output)
"""

import copy
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .autodiff import (
    Conv1d,
    Crop,
    Dense,
    GradientTape,
    MaxPool1d,
    Reshape,
    Sequential,
    Upsample1d,
    make_activation,
    mse_grad,
    mse_loss,
    ACTIVATIONS,
)
from .exceptions import ConfigError, ShapeError, TapeStateError
from .utils import derive_seed, round_half_up
from .warping import TrainingPair, WarpDirection, stack_pairs

logger = logging.getLogger(__name__)

DEFAULT_CODE_FRACTION = 0.2
DEFAULT_BLOCKS = ((16, 5), (32, 5))


def default_code_length(m: int) -> int:
    """20% of the series length, at least 1."""
    return max(1, round_half_up(DEFAULT_CODE_FRACTION * m))


@dataclass(frozen=True)
class AEConfig:
    """
    Architecture of one side of the twin (both sides share it).

    ``conv_blocks`` lists ``(filters, kernel)`` per conv+pool block;
    ``loss_weight`` is lambda, the weight of l3 in the total loss.
    """

    input_length: int
    code_length: Optional[int] = None
    conv_blocks: Tuple[Tuple[int, int], ...] = DEFAULT_BLOCKS
    pool_size: int = 2
    activation: str = "relu"
    loss_weight: float = 1.0

    def __post_init__(self):
        blocks = tuple((int(f), int(k)) for f, k in self.conv_blocks)
        object.__setattr__(self, "conv_blocks", blocks)
        if self.code_length is None:
            object.__setattr__(self, "code_length", default_code_length(self.input_length))
        if self.input_length < 4:
            raise ConfigError(f"input_length must be at least 4, got {self.input_length}")
        if self.code_length < 1:
            raise ConfigError(f"code_length must be at least 1, got {self.code_length}")
        if not blocks:
            raise ConfigError("At least one convolution block is required")
        for filters, kernel in blocks:
            if filters < 1:
                raise ConfigError(f"Filter counts must be positive, got {filters}")
            if kernel < 1 or kernel % 2 == 0:
                raise ConfigError(f"Kernel sizes must be odd and positive, got {kernel}")
        if self.pool_size < 2:
            raise ConfigError(f"pool_size must be at least 2, got {self.pool_size}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(
                f"Unknown activation {self.activation!r}; choose from {sorted(ACTIVATIONS)}"
            )
        if not self.loss_weight >= 0:
            raise ConfigError(f"loss_weight must be non-negative, got {self.loss_weight}")

    def encoded_length(self) -> int:
        length = self.input_length
        for _ in self.conv_blocks:
            length = -(-length // self.pool_size)
        return length


def build_encoder(config: AEConfig) -> Sequential:
    layers = []
    channels = 1
    for filters, kernel in config.conv_blocks:
        layers += [
            Conv1d(channels, filters, kernel),
            make_activation(config.activation),
            MaxPool1d(config.pool_size),
        ]
        channels = filters
    layers.append(Dense(channels * config.encoded_length(), config.code_length))
    return Sequential(layers)


def build_decoder(config: AEConfig) -> Sequential:
    channels = config.conv_blocks[-1][0]
    length = config.encoded_length()
    layers = [Dense(config.code_length, channels * length), Reshape((channels, length))]
    for i in reversed(range(len(config.conv_blocks))):
        out_channels = config.conv_blocks[i - 1][0] if i > 0 else config.conv_blocks[0][0]
        layers += [
            Upsample1d(config.pool_size),
            Conv1d(channels, out_channels, config.conv_blocks[i][1]),
            make_activation(config.activation),
        ]
        channels = out_channels
        length *= config.pool_size
    if length != config.input_length:
        layers.append(Crop(config.input_length))
    layers.append(Conv1d(channels, 1, config.conv_blocks[0][1]))
    return Sequential(layers)


def _as_batch(series, m: int) -> np.ndarray:
    """(B, m) or (m,) input to a (B, 1, m) tensor."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != m:
        raise ShapeError(f"Expected series of length {m}, got shape {np.shape(series)}")
    return x[:, None, :]


class AutoEncoder:
    """One side of the twin: an encoder/decoder pair."""

    def __init__(self, config: AEConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self.encoder = build_encoder(config)
        self.decoder = build_decoder(config)
        code_shape = self.encoder.output_shape((1, config.input_length))
        out_shape = self.decoder.output_shape((config.code_length,))
        if code_shape != (config.code_length,) or out_shape != (1, config.input_length):
            raise ConfigError(
                f"Architecture does not round-trip: code {code_shape}, output {out_shape}"
            )
        if rng is not None:
            self.encoder.initialize(rng)
            self.decoder.initialize(rng)

    def parameters(self) -> List[np.ndarray]:
        return self.encoder.parameters() + self.decoder.parameters()

    def parameter_names(self) -> List[str]:
        return [f"encoder.{name}" for name in self.encoder.parameter_names()] + [
            f"decoder.{name}" for name in self.decoder.parameter_names()
        ]

    def encode(self, series) -> np.ndarray:
        """Codes of shape (B, d) for (B, m) inputs (or (d,) for one series)."""
        x = np.asarray(series)
        codes = self.encoder.forward(_as_batch(series, self.config.input_length))
        return codes[0] if x.ndim == 1 else codes

    def reconstruct(self, series) -> np.ndarray:
        x = _as_batch(series, self.config.input_length)
        return self.decoder.forward(self.encoder.forward(x))[:, 0, :]

    def reconstruction_step(self, series) -> Tuple[float, List[np.ndarray]]:
        """Plain auto-encoder loss and gradients (encoder then decoder order)."""
        x = _as_batch(series, self.config.input_length)
        enc_tape, dec_tape = GradientTape(), GradientTape()
        recon = self.decoder.forward(self.encoder.forward(x, enc_tape), dec_tape)
        loss = mse_loss(recon, x)
        grad_code, dec_grads = self.decoder.backward(dec_tape, mse_grad(recon, x))
        _, enc_grads = self.encoder.backward(enc_tape, grad_code)
        return loss, enc_grads + dec_grads


@dataclass(frozen=True)
class TwinLosses:
    l1: float
    l2: float
    l3: float
    total: float


class TwinAE:
    """Left and right auto-encoders plus their shared architecture config."""

    def __init__(self, config: AEConfig, left: AutoEncoder, right: AutoEncoder):
        self.config = config
        self.left = left
        self.right = right

    def side(self, side: Union[WarpDirection, str]) -> AutoEncoder:
        return self.left if WarpDirection(side) is WarpDirection.LEFT else self.right

    def parameters(self) -> List[np.ndarray]:
        """left encoder, left decoder, right encoder, right decoder."""
        return self.left.parameters() + self.right.parameters()

    def parameter_names(self) -> List[str]:
        """Names aligned with :meth:`parameters`, e.g. ``left.encoder.0.conv1d.weight``."""
        return [f"left.{name}" for name in self.left.parameter_names()] + [
            f"right.{name}" for name in self.right.parameter_names()
        ]

    def copy(self) -> "TwinAE":
        return copy.deepcopy(self)

    def load_parameters(self, values: Sequence[np.ndarray]) -> None:
        params = self.parameters()
        if len(values) != len(params):
            raise ShapeError(f"Expected {len(params)} parameter arrays, got {len(values)}")
        for name, p, v in zip(self.parameter_names(), params, values):
            if p.shape != np.shape(v):
                raise ShapeError(f"Parameter {name} has shape {p.shape}, got {np.shape(v)}")
            p[...] = v


def build_twin(config: AEConfig, seed: int) -> TwinAE:
    """Both sides initialized from independent sub-seeds of ``seed``."""
    left = AutoEncoder(config, np.random.default_rng(derive_seed(seed, 0)))
    right = AutoEncoder(config, np.random.default_rng(derive_seed(seed, 1)))
    logger.debug(
        f"Built twin auto-encoder m={config.input_length} d={config.code_length} "
        f"blocks={config.conv_blocks} with {sum(p.size for p in left.parameters())} "
        f"parameters per side"
    )
    return TwinAE(config, left, right)


@dataclass
class TwinTape:
    """Everything a twin backward pass needs from the forward pass."""

    left_input: np.ndarray
    right_input: np.ndarray
    left_code: np.ndarray
    right_code: np.ndarray
    left_reconstruction: np.ndarray
    right_reconstruction: np.ndarray
    left_encoder: GradientTape = field(default_factory=GradientTape)
    left_decoder: GradientTape = field(default_factory=GradientTape)
    right_encoder: GradientTape = field(default_factory=GradientTape)
    right_decoder: GradientTape = field(default_factory=GradientTape)
    consumed: bool = False

    def pattern(self):
        return (
            self.left_encoder.pattern(),
            self.left_decoder.pattern(),
            self.right_encoder.pattern(),
            self.right_decoder.pattern(),
        )


@dataclass
class TwinGradients:
    left_encoder: List[np.ndarray]
    left_decoder: List[np.ndarray]
    right_encoder: List[np.ndarray]
    right_decoder: List[np.ndarray]

    def flat(self) -> List[np.ndarray]:
        """Aligned with :meth:`TwinAE.parameters`."""
        return self.left_encoder + self.left_decoder + self.right_encoder + self.right_decoder


def _pair_inputs(pairs, m: int) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(pairs, TrainingPair):
        pairs = [pairs]
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], np.ndarray):
        left, right = pairs
    else:
        left, right = stack_pairs(pairs)
    return _as_batch(left, m), _as_batch(right, m)


def twin_forward(twin: TwinAE, pairs) -> Tuple[TwinLosses, TwinTape]:
    """
    Losses for one pair or a batch of pairs (batch losses are per-pair means).

    ``pairs`` is a :class:`TrainingPair`, a sequence of them, or a
    ``(left, right)`` tuple of ``(B, m)`` arrays.
    """
    x1, x2 = _pair_inputs(pairs, twin.config.input_length)
    tape = TwinTape(x1, x2, None, None, None, None)
    tape.left_code = twin.left.encoder.forward(x1, tape.left_encoder)
    tape.right_code = twin.right.encoder.forward(x2, tape.right_encoder)
    tape.left_reconstruction = twin.left.decoder.forward(tape.left_code, tape.left_decoder)
    tape.right_reconstruction = twin.right.decoder.forward(tape.right_code, tape.right_decoder)
    return _losses(twin, tape), tape


def _losses(twin: TwinAE, tape: TwinTape) -> TwinLosses:
    l1 = mse_loss(tape.left_reconstruction, tape.left_input)
    l2 = mse_loss(tape.right_reconstruction, tape.right_input)
    diff = tape.left_code - tape.right_code
    l3 = float(np.mean(np.sum(diff * diff, axis=1)))
    return TwinLosses(l1, l2, l3, l1 + l2 + twin.config.loss_weight * l3)


def twin_backward(
    twin: TwinAE, tape: TwinTape, mask_reconstruction: bool = False
) -> TwinGradients:
    """
    Gradients of the total loss.

    Decoders only ever receive the reconstruction gradients; the code
    distance term is added at the encoder outputs. With
    ``mask_reconstruction`` the l1/l2 terms are zeroed, leaving only
    ``lambda * l3``.
    """
    if tape.consumed:
        raise TapeStateError("Twin tape was already consumed by a backward pass")
    tape.consumed = True

    if mask_reconstruction:
        g_recon1 = np.zeros_like(tape.left_reconstruction)
        g_recon2 = np.zeros_like(tape.right_reconstruction)
    else:
        g_recon1 = mse_grad(tape.left_reconstruction, tape.left_input)
        g_recon2 = mse_grad(tape.right_reconstruction, tape.right_input)

    g_code1, left_dec = twin.left.decoder.backward(tape.left_decoder, g_recon1)
    g_code2, right_dec = twin.right.decoder.backward(tape.right_decoder, g_recon2)

    weight = twin.config.loss_weight
    if weight != 0.0:
        batch = tape.left_code.shape[0]
        coupling = (2.0 * weight / batch) * (tape.left_code - tape.right_code)
        g_code1 = g_code1 + coupling
        g_code2 = g_code2 - coupling

    _, left_enc = twin.left.encoder.backward(tape.left_encoder, g_code1)
    _, right_enc = twin.right.encoder.backward(tape.right_encoder, g_code2)
    return TwinGradients(left_enc, left_dec, right_enc, right_dec)


def twin_loss(twin: TwinAE, pairs) -> TwinLosses:
    """Forward-only losses (no gradients kept)."""
    losses, _ = twin_forward(twin, pairs)
    return losses


def twin_gradient_check(twin: TwinAE, pairs, epsilon: float = 1e-5) -> float:
    """Max relative error of :func:`twin_backward` against central differences of the total."""
    from .autodiff import check_gradients

    _, tape = twin_forward(twin, pairs)
    analytic = twin_backward(twin, tape).flat()

    def objective():
        losses, tape = twin_forward(twin, pairs)
        return losses.total, tape.pattern()

    return check_gradients(objective, twin.parameters(), analytic, epsilon)


def encode(twin: TwinAE, side: Union[WarpDirection, str], series) -> np.ndarray:
    """Code of ``series`` from the chosen side's encoder."""
    return twin.side(side).encode(series)


def embed(twin: TwinAE, series) -> np.ndarray:
    """Average of the left and right codes."""
    return (twin.left.encode(series) + twin.right.encode(series)) / 2.0


def embed_many(twin: TwinAE, matrix, batch_size: int = 256) -> np.ndarray:
    """Embeddings for every row of an ``(n, m)`` matrix, computed in chunks."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != twin.config.input_length:
        raise ShapeError(
            f"Model expects series of length {twin.config.input_length}, got shape {matrix.shape}"
        )
    chunks = [
        embed(twin, matrix[start : start + batch_size])
        for start in range(0, matrix.shape[0], batch_size)
    ]
    if not chunks:
        return np.zeros((0, twin.config.code_length))
    return np.concatenate(chunks, axis=0)
