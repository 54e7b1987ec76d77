"""
WARTEM1 model files.

Layout (all little-endian):

    b"WARTEM1"                        7-byte magic
    int64  header length H            number of int64 fields that follow
    int64  m, d, pool_size, activation code, block count, then
           (filters, kernel) per block
    float64 lambda
    float64 parameters, flattened in declaration order:
           left encoder, left decoder, right encoder, right decoder

Example:
    >>> from wartem.checkpoint import save_twin, load_twin
    >>> save_twin(twin, "model.wartem")
    >>> restored = load_twin("model.wartem")
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from .exceptions import CheckpointError
from .twin import AEConfig, AutoEncoder, TwinAE

logger = logging.getLogger(__name__)

MAGIC = b"WARTEM1"
ACTIVATION_CODES = {"relu": 0, "tanh": 1, "identity": 2}
ACTIVATION_NAMES = {code: name for name, code in ACTIVATION_CODES.items()}

_INT = np.dtype("<i8")
_FLOAT = np.dtype("<f8")


def twin_to_bytes(twin: TwinAE) -> bytes:
    config = twin.config
    header = [
        config.input_length,
        config.code_length,
        config.pool_size,
        ACTIVATION_CODES[config.activation],
        len(config.conv_blocks),
    ]
    for filters, kernel in config.conv_blocks:
        header += [filters, kernel]
    chunks = [
        MAGIC,
        np.array([len(header)], dtype=_INT).tobytes(),
        np.array(header, dtype=_INT).tobytes(),
        np.array([config.loss_weight], dtype=_FLOAT).tobytes(),
    ]
    chunks += [np.ascontiguousarray(p, dtype=_FLOAT).tobytes() for p in twin.parameters()]
    return b"".join(chunks)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, dtype: np.dtype, count: int, what: str) -> np.ndarray:
        size = dtype.itemsize * count
        if count < 0 or self.offset + size > len(self.blob):
            raise CheckpointError(
                f"Truncated checkpoint: need {size} bytes for {what} at offset {self.offset}, "
                f"have {len(self.blob) - self.offset}"
            )
        values = np.frombuffer(self.blob, dtype=dtype, count=count, offset=self.offset)
        self.offset += size
        return values


def twin_from_bytes(blob: bytes) -> TwinAE:
    if not blob.startswith(MAGIC):
        raise CheckpointError("Not a WARTEM1 checkpoint (bad magic)")
    reader = _Reader(blob)
    reader.offset = len(MAGIC)
    header_length = int(reader.take(_INT, 1, "header length")[0])
    if header_length < 5:
        raise CheckpointError(f"Header too short: {header_length} fields")
    header = [int(v) for v in reader.take(_INT, header_length, "header")]
    m, d, pool, activation_code, block_count = header[:5]
    if header_length != 5 + 2 * block_count:
        raise CheckpointError(
            f"Header has {header_length} fields but declares {block_count} blocks"
        )
    if activation_code not in ACTIVATION_NAMES:
        raise CheckpointError(f"Unknown activation code {activation_code}")
    blocks = tuple(
        (header[5 + 2 * i], header[6 + 2 * i]) for i in range(block_count)
    )
    loss_weight = float(reader.take(_FLOAT, 1, "lambda")[0])

    try:
        config = AEConfig(
            input_length=m,
            code_length=d,
            conv_blocks=blocks,
            pool_size=pool,
            activation=ACTIVATION_NAMES[activation_code],
            loss_weight=loss_weight,
        )
    except Exception as e:
        raise CheckpointError(f"Invalid architecture in checkpoint: {e}") from e

    twin = TwinAE(config, AutoEncoder(config), AutoEncoder(config))
    for name, param in zip(twin.parameter_names(), twin.parameters()):
        values = reader.take(_FLOAT, param.size, f"parameter {name}")
        param[...] = values.reshape(param.shape)
    if reader.offset != len(blob):
        raise CheckpointError(f"{len(blob) - reader.offset} trailing bytes after parameters")
    return twin


def save_twin(twin: TwinAE, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(twin_to_bytes(twin))
    logger.debug(f"Saved twin checkpoint to {path}")
    return path


def load_twin(path: Union[str, Path]) -> TwinAE:
    path = Path(path)
    twin = twin_from_bytes(path.read_bytes())
    logger.debug(
        f"Loaded twin checkpoint {path} (m={twin.config.input_length}, d={twin.config.code_length})"
    )
    return twin
