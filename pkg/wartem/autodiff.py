"""
A small dense-tensor engine with hand-written reverse-mode gradients.

Tensors are float64 numpy arrays with a leading batch axis: ``(B, C, L)``
for sequences (channels, length) and ``(B, F)`` for dense features. The
layer vocabulary is exactly what the twin auto-encoder and the static
classifier need:

    Conv1d      "same" zero padding, odd kernels, length preserved
    MaxPool1d   windows of ``size``, partial last window, ties -> first index
    Upsample1d  nearest-neighbor repetition
    Dense       flattens its input, ``W x + b``
    Relu, Tanh, Identity
    Reshape, Crop   (length bookkeeping between encoder and decoder)

A forward pass records ``(layer, cache)`` entries on a :class:`GradientTape`;
:func:`backward` consumes the tape once and returns the input gradient and
per-layer parameter gradients.

Example:
    >>> net = Sequential([Dense(3, 2), Relu(), Dense(2, 1)])
    >>> net.initialize(np.random.default_rng(0))
    >>> tape = GradientTape()
    >>> out = net.forward(np.ones((4, 3)), tape)
    >>> grad_in, grads = net.backward(tape, mse_grad(out, np.zeros_like(out)))
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ArgumentError, ShapeError, TapeStateError

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]


class Layer:
    """Base class. Subclasses fill ``params`` and implement forward/backward."""

    kind = "layer"

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}

    def initialize(self, rng: np.random.Generator) -> None:
        pass

    def output_shape(self, input_shape: Shape) -> Shape:
        """Per-sample output shape (no batch axis)."""
        return input_shape

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, cache: Any, grad: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        raise NotImplementedError

    def pattern(self, cache: Any) -> Optional[np.ndarray]:
        """Discrete branch choices taken in the forward pass (ReLU masks, argmaxes)."""
        return None

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


def glorot_uniform(rng: np.random.Generator, shape: Shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv1d(Layer):
    kind = "conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel: int):
        super().__init__()
        if kernel < 1 or kernel % 2 == 0:
            raise ArgumentError(f"Conv1d kernel must be odd and positive, got {kernel}")
        if in_channels < 1 or out_channels < 1:
            raise ArgumentError("Conv1d channel counts must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.padding = (kernel - 1) // 2
        self.params = {
            "weight": np.zeros((out_channels, in_channels, kernel)),
            "bias": np.zeros(out_channels),
        }

    def initialize(self, rng: np.random.Generator) -> None:
        self.params["weight"][...] = glorot_uniform(
            rng,
            self.params["weight"].shape,
            self.in_channels * self.kernel,
            self.out_channels * self.kernel,
        )
        self.params["bias"][...] = 0.0

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 2 or input_shape[0] != self.in_channels:
            raise ShapeError(
                f"Conv1d expects ({self.in_channels}, L) inputs, got {input_shape}"
            )
        return (self.out_channels, input_shape[1])

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"Conv1d expects (B, {self.in_channels}, L) inputs, got {x.shape}"
            )
        batch, channels, length = x.shape
        padded = np.pad(x, ((0, 0), (0, 0), (self.padding, self.padding)))
        # (B, C, L, K) -> (B*L, C*K)
        windows = sliding_window_view(padded, self.kernel, axis=2)
        cols = windows.transpose(0, 2, 1, 3).reshape(batch * length, channels * self.kernel)
        weight = self.params["weight"].reshape(self.out_channels, -1)
        out = (cols @ weight.T).reshape(batch, length, self.out_channels).transpose(0, 2, 1)
        out = out + self.params["bias"][None, :, None]
        return np.ascontiguousarray(out), (cols, x.shape)

    def backward(self, cache, grad):
        cols, (batch, channels, length) = cache
        g2 = grad.transpose(0, 2, 1).reshape(batch * length, self.out_channels)
        weight = self.params["weight"].reshape(self.out_channels, -1)
        grads = {
            "weight": (g2.T @ cols).reshape(self.params["weight"].shape),
            "bias": grad.sum(axis=(0, 2)),
        }
        dcols = (g2 @ weight).reshape(batch, length, channels, self.kernel)
        dpad = np.zeros((batch, channels, length + 2 * self.padding))
        for k in range(self.kernel):
            dpad[:, :, k : k + length] += dcols[:, :, :, k].transpose(0, 2, 1)
        return dpad[:, :, self.padding : self.padding + length], grads

    def __repr__(self):
        return f"Conv1d({self.in_channels}->{self.out_channels}, k={self.kernel})"


class MaxPool1d(Layer):
    kind = "maxpool1d"

    def __init__(self, size: int):
        super().__init__()
        if size < 2:
            raise ArgumentError(f"Pool size must be at least 2, got {size}")
        self.size = size

    def output_shape(self, input_shape):
        channels, length = input_shape
        return (channels, -(-length // self.size))

    def forward(self, x):
        if x.ndim != 3 or x.shape[2] < 1:
            raise ShapeError(f"MaxPool1d expects (B, C, L>=1) inputs, got {x.shape}")
        batch, channels, length = x.shape
        out_len = -(-length // self.size)
        padded = np.full((batch, channels, out_len * self.size), -np.inf)
        padded[:, :, :length] = x
        windows = padded.reshape(batch, channels, out_len, self.size)
        argmax = np.argmax(windows, axis=3)
        out = np.take_along_axis(windows, argmax[..., None], axis=3)[..., 0]
        return out, (argmax, x.shape)

    def backward(self, cache, grad):
        argmax, (batch, channels, length) = cache
        out_len = argmax.shape[2]
        dwin = np.zeros((batch, channels, out_len, self.size))
        np.put_along_axis(dwin, argmax[..., None], grad[..., None], axis=3)
        return dwin.reshape(batch, channels, out_len * self.size)[:, :, :length], {}

    def pattern(self, cache):
        return cache[0]

    def __repr__(self):
        return f"MaxPool1d({self.size})"


class Upsample1d(Layer):
    kind = "upsample1d"

    def __init__(self, factor: int):
        super().__init__()
        if factor < 2:
            raise ArgumentError(f"Upsample factor must be at least 2, got {factor}")
        self.factor = factor

    def output_shape(self, input_shape):
        channels, length = input_shape
        return (channels, length * self.factor)

    def forward(self, x):
        return np.repeat(x, self.factor, axis=2), x.shape

    def backward(self, cache, grad):
        batch, channels, length = cache
        return grad.reshape(batch, channels, length, self.factor).sum(axis=3), {}

    def __repr__(self):
        return f"Upsample1d({self.factor})"


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        if in_features < 1 or out_features < 1:
            raise ArgumentError("Dense layer sizes must be positive")
        self.in_features = in_features
        self.out_features = out_features
        self.params = {
            "weight": np.zeros((out_features, in_features)),
            "bias": np.zeros(out_features),
        }

    def initialize(self, rng):
        self.params["weight"][...] = glorot_uniform(
            rng, self.params["weight"].shape, self.in_features, self.out_features
        )
        self.params["bias"][...] = 0.0

    def output_shape(self, input_shape):
        if int(np.prod(input_shape)) != self.in_features:
            raise ShapeError(f"Dense expects {self.in_features} inputs, got shape {input_shape}")
        return (self.out_features,)

    def forward(self, x):
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.in_features:
            raise ShapeError(
                f"Dense expects {self.in_features} inputs, got {flat.shape[1]}"
            )
        out = flat @ self.params["weight"].T + self.params["bias"]
        return out, (flat, x.shape)

    def backward(self, cache, grad):
        flat, in_shape = cache
        grads = {"weight": grad.T @ flat, "bias": grad.sum(axis=0)}
        return (grad @ self.params["weight"]).reshape(in_shape), grads

    def __repr__(self):
        return f"Dense({self.in_features}->{self.out_features})"


class Relu(Layer):
    kind = "relu"

    def forward(self, x):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, cache, grad):
        return grad * cache, {}

    def pattern(self, cache):
        return cache


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x):
        out = np.tanh(x)
        return out, out

    def backward(self, cache, grad):
        return grad * (1.0 - cache * cache), {}


class Identity(Layer):
    kind = "identity"

    def forward(self, x):
        return x, None

    def backward(self, cache, grad):
        return grad, {}


class Reshape(Layer):
    kind = "reshape"

    def __init__(self, shape: Shape):
        super().__init__()
        self.shape = tuple(shape)

    def output_shape(self, input_shape):
        if int(np.prod(input_shape)) != int(np.prod(self.shape)):
            raise ShapeError(f"Cannot reshape {input_shape} to {self.shape}")
        return self.shape

    def forward(self, x):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def backward(self, cache, grad):
        return grad.reshape(cache), {}

    def __repr__(self):
        return f"Reshape{self.shape}"


class Crop(Layer):
    """Keep the first ``length`` steps of a sequence."""

    kind = "crop"

    def __init__(self, length: int):
        super().__init__()
        self.length = length

    def output_shape(self, input_shape):
        channels, length = input_shape
        if length < self.length:
            raise ShapeError(f"Cannot crop length {length} to {self.length}")
        return (channels, self.length)

    def forward(self, x):
        return x[:, :, : self.length], x.shape

    def backward(self, cache, grad):
        out = np.zeros(cache)
        out[:, :, : self.length] = grad
        return out, {}

    def __repr__(self):
        return f"Crop({self.length})"


ACTIVATIONS: Dict[str, Callable[[], Layer]] = {
    "relu": Relu,
    "tanh": Tanh,
    "identity": Identity,
}


def make_activation(kind: str) -> Layer:
    try:
        return ACTIVATIONS[kind]()
    except KeyError:
        raise ArgumentError(
            f"Unknown activation {kind!r}; choose from {sorted(ACTIVATIONS)}"
        ) from None


class GradientTape:
    """Records forward activations; consumed by exactly one backward pass."""

    def __init__(self):
        self.entries: List[Tuple[Layer, Any]] = []
        self.consumed = False

    def record(self, layer: Layer, cache: Any) -> None:
        if self.consumed:
            raise TapeStateError("Cannot record on a tape that was already consumed")
        self.entries.append((layer, cache))

    def pattern(self) -> Tuple[bytes, ...]:
        """Fingerprint of every discrete branch taken during the forward pass."""
        chunks = []
        for layer, cache in self.entries:
            p = layer.pattern(cache)
            if p is not None:
                chunks.append(np.ascontiguousarray(p).tobytes())
        return tuple(chunks)

    def __len__(self):
        return len(self.entries)


def backward(tape: GradientTape, grad: np.ndarray) -> Tuple[np.ndarray, List[Dict[str, np.ndarray]]]:
    """
    Reverse-mode pass over ``tape``.

    Returns the gradient with respect to the tape's input and one parameter
    gradient dict per recorded entry, in forward order.
    """
    if tape.consumed:
        raise TapeStateError("Gradient tape was already consumed by a backward pass")
    tape.consumed = True
    per_entry: List[Dict[str, np.ndarray]] = [None] * len(tape.entries)
    for index in range(len(tape.entries) - 1, -1, -1):
        layer, cache = tape.entries[index]
        grad, per_entry[index] = layer.backward(cache, grad)
    return grad, per_entry


class Sequential:
    """An ordered stack of layers."""

    def __init__(self, layers: Sequence[Layer]):
        self.layers = list(layers)

    def initialize(self, rng: np.random.Generator) -> "Sequential":
        for layer in self.layers:
            layer.initialize(rng)
        return self

    def output_shape(self, input_shape: Shape) -> Shape:
        shape = tuple(input_shape)
        for layer in self.layers:
            shape = layer.output_shape(shape)
            if any(s <= 0 for s in shape):
                raise ShapeError(f"{layer!r} produces non-positive shape {shape}")
        return shape

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in declaration order (weight before bias)."""
        return [array for layer in self.layers for array in layer.params.values()]

    def parameter_names(self) -> List[str]:
        return [
            f"{i}.{layer.kind}.{name}"
            for i, layer in enumerate(self.layers)
            for name in layer.params
        ]

    def forward(self, x: np.ndarray, tape: Optional[GradientTape] = None) -> np.ndarray:
        for layer in self.layers:
            x, cache = layer.forward(x)
            if tape is not None:
                tape.record(layer, cache)
        return x

    def backward(self, tape: GradientTape, grad: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
        """Input gradient plus gradients aligned with :meth:`parameters`."""
        grad_in, per_entry = backward(tape, grad)
        flat = [g for grads in per_entry for g in grads.values()]
        return grad_in, flat

    def copy_parameters_from(self, other: "Sequential") -> None:
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine[...] = theirs

    def __repr__(self):
        return "Sequential(" + ", ".join(repr(layer) for layer in self.layers) + ")"


# --- Losses ---


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over all elements of ``(pred - target)**2``."""
    if pred.shape != target.shape:
        raise ShapeError(f"MSE shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    if pred.shape != target.shape:
        raise ShapeError(f"MSE shape mismatch: {pred.shape} vs {target.shape}")
    return 2.0 * (pred - target) / pred.size


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _logits_and_labels(logits, labels) -> Tuple[np.ndarray, np.ndarray]:
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape[0] != z.shape[0]:
        raise ShapeError(f"{z.shape[0]} logit rows for {y.shape[0]} labels")
    if y.size and (y.min() < 0 or y.max() >= z.shape[1]):
        raise ArgumentError(f"Label out of range for {z.shape[1]} classes")
    return z, y


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits, labels) -> float:
    """Mean of ``-log softmax(logits)[label]`` over rows (max-shifted for stability)."""
    z, y = _logits_and_labels(logits, labels)
    log_probs = _log_softmax(z)
    return float(-np.mean(log_probs[np.arange(y.shape[0]), y]))


def softmax_cross_entropy_grad(logits, labels) -> np.ndarray:
    z, y = _logits_and_labels(logits, labels)
    probs = np.exp(_log_softmax(z))
    probs[np.arange(y.shape[0]), y] -= 1.0
    return probs / y.shape[0]


# --- Optimizer ---


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: List[np.ndarray] = field(default_factory=list)
    second_moment: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_parameters(cls, params: Sequence[np.ndarray], **hyper) -> "AdamState":
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            **hyper,
        )


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState
) -> Tuple[Sequence[np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    if len(state.first_moment) != len(params):
        raise ShapeError("Adam state does not match the parameter list")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"Parameter {p.shape} vs gradient {g.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
    return params, state


# --- Gradient checking ---


def check_gradients(
    objective: Callable[[], Tuple[float, Hashable]],
    params: Sequence[np.ndarray],
    analytic: Sequence[np.ndarray],
    epsilon: float = 1e-5,
) -> float:
    """
    Compare analytic gradients against central differences.

    ``objective`` re-evaluates the loss from the current (in-place perturbed)
    parameter values and returns ``(loss, pattern)``. A parameter whose ±ε
    perturbation changes the pattern sits on a kink (ReLU boundary, maxpool
    tie) and is skipped. Returns the max over parameters of
    ``|a - n| / max(1e-12, |a| + |n|)``.
    """
    if not epsilon > 0:
        raise ArgumentError(f"epsilon must be positive, got {epsilon}")
    _, base_pattern = objective()
    worst = 0.0
    skipped = 0
    for p, a in zip(params, analytic):
        flat = p.reshape(-1)
        grad_flat = np.asarray(a).reshape(-1)
        for i in range(flat.shape[0]):
            saved = flat[i]
            flat[i] = saved + epsilon
            plus, plus_pattern = objective()
            flat[i] = saved - epsilon
            minus, minus_pattern = objective()
            flat[i] = saved
            if plus_pattern != base_pattern or minus_pattern != base_pattern:
                skipped += 1
                continue
            numeric = (plus - minus) / (2.0 * epsilon)
            error = abs(grad_flat[i] - numeric) / max(1e-12, abs(grad_flat[i]) + abs(numeric))
            worst = max(worst, error)
    if skipped:
        logger.debug(f"Gradient check skipped {skipped} parameters at non-differentiable points")
    return worst


def gradient_check(
    network: Sequential,
    x: np.ndarray,
    epsilon: float = 1e-5,
    target: Optional[np.ndarray] = None,
) -> float:
    """Max relative gradient error of ``mse(network(x), target)`` (target defaults to 0)."""
    if not epsilon > 0:
        raise ArgumentError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=np.float64)
    tape = GradientTape()
    out = network.forward(x, tape)
    if target is None:
        target = np.zeros_like(out)
    _, analytic = network.backward(tape, mse_grad(out, target))

    def objective():
        tape = GradientTape()
        value = mse_loss(network.forward(x, tape), target)
        return value, tape.pattern()

    return check_gradients(objective, network.parameters(), analytic, epsilon)
