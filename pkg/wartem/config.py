"""
Run configuration files.

A config file is a list of ``key = value`` lines; ``#`` starts a comment and
blank lines are ignored::

    # ArrowHead, mixed warps, three seeds
    family = mixed
    lambda = 1.0
    seeds = 1, 2, 3
    conv_filters = 16, 32

Every key must be known to :data:`SCHEMA` (near misses get a suggestion),
may appear only once, and is converted to its declared type. Keys left out
take their defaults; ``family`` has none and must be given for training.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, Union

import rapidfuzz.distance as distance
from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedInput

from . import __version__
from .autodiff import ACTIVATIONS
from .evaluation import ClassifierConfig
from .exceptions import (
    ConfigError,
    ConfigSyntaxError,
    InvalidConfigValueError,
    MissingConfigKeyError,
    UnknownConfigKeyError,
)
from .training import TrainConfig
from .warping import WarpFamily

logger = logging.getLogger(__name__)

CONFIG_GRAMMAR = r"""
    start: (entry | _NL)*

    entry: KEY "=" [VALUE] _NL

    KEY: /[A-Za-z_][A-Za-z0-9_.-]*/
    VALUE: /[^\s#][^\r\n#]*/
    COMMENT: /#[^\r\n]*/
    _NL: /\r?\n/

    %import common.WS_INLINE
    %ignore WS_INLINE
    %ignore COMMENT
"""

SUGGESTION_CUTOFF = 0.6


@dataclass(frozen=True)
class ConfigEntry:
    key: str
    raw: str
    line: int


@v_args(inline=True)
class ConfigTransformer(Transformer):
    """Turn the parse tree into ConfigEntry records"""

    def start(self, *entries):
        return list(entries)

    def entry(self, key, value=None):
        raw = str(value).strip() if value is not None else ""
        return ConfigEntry(str(key), raw, key.line)


_parser = Lark(CONFIG_GRAMMAR, parser="lalr", lexer="contextual")


def parse_config_text(text: str) -> List[ConfigEntry]:
    """Parse config text into entries, in file order."""
    if not text.endswith("\n"):
        text += "\n"
    try:
        tree = _parser.parse(text)
    except UnexpectedInput as e:
        raise ConfigSyntaxError(
            "expected 'key = value'", line=getattr(e, "line", None)
        ) from None
    return ConfigTransformer().transform(tree)


# --- Value converters ---


def _int(raw: str) -> int:
    return int(raw)


def _float(raw: str) -> float:
    return float(raw)


def _bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _int_list(raw: str) -> Tuple[int, ...]:
    values = tuple(int(part) for part in raw.split(",") if part.strip())
    if not values:
        raise ValueError("expected a comma-separated list of integers")
    return values


def _choice(options: Iterable[str]) -> Callable[[str], str]:
    options = sorted(options)

    def convert(raw: str) -> str:
        if raw.lower() not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return raw.lower()

    return convert


def _text(raw: str) -> str:
    return raw


@dataclass(frozen=True)
class ConfigKey:
    convert: Callable[[str], Any]
    default: Any = None
    optional: bool = False
    minimum: Optional[float] = None


SCHEMA: Dict[str, ConfigKey] = {
    # training
    "family": ConfigKey(_choice(f.value for f in WarpFamily)),
    "lambda": ConfigKey(_float, 1.0, minimum=0.0),
    "batch_size": ConfigKey(_int, 32, minimum=1),
    "max_epochs": ConfigKey(_int, 500, minimum=1),
    "patience": ConfigKey(_int, 20, minimum=1),
    "holdout_fraction": ConfigKey(_float, 0.1),
    "learning_rate": ConfigKey(_float, 1e-3),
    "beta1": ConfigKey(_float, 0.9),
    "beta2": ConfigKey(_float, 0.999),
    "epsilon": ConfigKey(_float, 1e-8),
    "seeds": ConfigKey(_int_list, (0,)),
    "regenerate_pairs": ConfigKey(_bool, True),
    "max_warps": ConfigKey(_int, None, optional=True, minimum=0),
    "normalize": ConfigKey(_bool, False),
    "workers": ConfigKey(_int, None, optional=True, minimum=1),
    # architecture
    "code_length": ConfigKey(_int, None, optional=True, minimum=1),
    "conv_filters": ConfigKey(_int_list, (16, 32)),
    "conv_kernels": ConfigKey(_int_list, (5, 5)),
    "pool_size": ConfigKey(_int, 2, minimum=2),
    "activation": ConfigKey(_choice(ACTIVATIONS), "relu"),
    # evaluation
    "dtw_band": ConfigKey(_int, None, optional=True, minimum=0),
    "classifier_trials": ConfigKey(_int, 10, minimum=1),
    "classifier_epochs": ConfigKey(_int, 300, minimum=1),
    "classifier_patience": ConfigKey(_int, 20, minimum=1),
    "classifier_batch_size": ConfigKey(_int, 32, minimum=1),
    "classifier_learning_rate": ConfigKey(_float, 1e-3),
    "dataset_name": ConfigKey(_text, None, optional=True),
}


def suggest_key(key: str) -> Optional[str]:
    """Closest schema key by normalized Levenshtein similarity, if close enough."""
    best, score = None, 0.0
    for candidate in SCHEMA:
        similarity = distance.Levenshtein.normalized_similarity(key, candidate)
        if similarity > score:
            best, score = candidate, similarity
    return best if score >= SUGGESTION_CUTOFF else None


def _convert(entry: ConfigEntry) -> Any:
    key_def = SCHEMA[entry.key]
    if entry.raw == "":
        if key_def.optional:
            return None
        raise InvalidConfigValueError(entry.key, entry.raw, "a value is required")
    try:
        value = key_def.convert(entry.raw)
    except ValueError as e:
        raise InvalidConfigValueError(entry.key, entry.raw, str(e)) from None
    if key_def.minimum is not None:
        items = value if isinstance(value, tuple) else (value,)
        if any(item < key_def.minimum for item in items):
            raise InvalidConfigValueError(entry.key, entry.raw, f"must be at least {key_def.minimum}")
    return value


class RunConfig:
    """
    A fully resolved configuration: every schema key with its value.

    ``explicit`` names the keys that were set in the file (the rest hold
    defaults). Values are read with ``config["batch_size"]``.
    """

    def __init__(self, values: Dict[str, Any], explicit: Iterable[str] = (), source: str = ""):
        self.values = dict(values)
        self.explicit = frozenset(explicit)
        self.source = source

    def __getitem__(self, key: str) -> Any:
        if key not in self.values:
            raise UnknownConfigKeyError(key, suggest_key(key))
        return self.values[key]

    def require(self, key: str) -> Any:
        value = self[key]
        if value is None:
            raise MissingConfigKeyError(key)
        return value

    def with_values(self, **overrides) -> "RunConfig":
        for key in overrides:
            if key not in SCHEMA:
                raise UnknownConfigKeyError(key, suggest_key(key))
        values = dict(self.values)
        values.update(overrides)
        return RunConfig(values, self.explicit | set(overrides), self.source)

    def conv_blocks(self) -> Tuple[Tuple[int, int], ...]:
        filters, kernels = self["conv_filters"], self["conv_kernels"]
        if len(filters) != len(kernels):
            raise InvalidConfigValueError(
                "conv_kernels",
                ",".join(map(str, kernels)),
                f"needs one kernel per filter count ({len(filters)})",
            )
        return tuple(zip(filters, kernels))

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        """Training settings; requires ``family``."""
        try:
            return TrainConfig(
                family=WarpFamily(self.require("family")),
                loss_weight=self["lambda"],
                batch_size=self["batch_size"],
                max_epochs=self["max_epochs"],
                patience=self["patience"],
                holdout_fraction=self["holdout_fraction"],
                learning_rate=self["learning_rate"],
                beta1=self["beta1"],
                beta2=self["beta2"],
                epsilon=self["epsilon"],
                seed=self["seeds"][0] if seed is None else seed,
                regenerate_pairs=self["regenerate_pairs"],
                max_warps=self["max_warps"],
                code_length=self["code_length"],
                conv_blocks=self.conv_blocks(),
                pool_size=self["pool_size"],
                activation=self["activation"],
            )
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(
            max_epochs=self["classifier_epochs"],
            patience=self["classifier_patience"],
            batch_size=self["classifier_batch_size"],
            learning_rate=self["classifier_learning_rate"],
            trials=self["classifier_trials"],
        )

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready values, tuples as lists, in schema order."""
        return {
            key: list(value) if isinstance(value, tuple) else value
            for key, value in self.values.items()
        }

    def config_hash(self) -> str:
        """First 12 hex digits of the sha256 of the canonical resolved config."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def default_config() -> RunConfig:
    return RunConfig({key: key_def.default for key, key_def in SCHEMA.items()})


def resolve_config(entries: Iterable[ConfigEntry], source: str = "") -> RunConfig:
    """Check keys, reject duplicates, convert values and fill in defaults."""
    values = {key: key_def.default for key, key_def in SCHEMA.items()}
    seen: Dict[str, int] = {}
    for entry in entries:
        if entry.key not in SCHEMA:
            raise UnknownConfigKeyError(entry.key, suggest_key(entry.key), entry.line)
        if entry.key in seen:
            raise ConfigSyntaxError(
                f"duplicate key {entry.key!r} (first set on line {seen[entry.key]})",
                line=entry.line,
            )
        seen[entry.key] = entry.line
        values[entry.key] = _convert(entry)
    return RunConfig(values, seen, source)


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    logger.debug(f"Reading config from {path}")
    config = resolve_config(parse_config_text(path.read_text(encoding="utf-8")), str(path))
    logger.info(f"Loaded config {path} ({len(config.explicit)} keys set, hash {config.config_hash()})")
    return config


def write_provenance(
    path: Union[str, Path],
    config: RunConfig,
    command: str,
    seeds: Iterable[int] = (),
    **extra: Any,
) -> Path:
    """
    JSON record of a run: command, seeds, full resolved config and version.

    Seeds are always listed, including defaulted ones.
    """
    path = Path(path)
    record = {
        "command": command,
        "version": __version__,
        "seeds": [int(s) for s in seeds],
        "config_source": config.source,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
    }
    record.update(extra)
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Wrote provenance record {path}")
    return path
