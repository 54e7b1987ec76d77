"""
WaRTEm Custom Exception Classes
===============================

This module defines the exceptions raised across the package. They are
organized by the stage at which they occur (loading data, warping, building
and training networks, reading configuration) so callers can decide what to
catch. Every exception carries its context as attributes.
"""


class WartemError(Exception):
    """Base exception for all WaRTEm errors"""

    pass


# Dataset errors (raised while loading / validating UCR files)
class DatasetError(WartemError):
    """Base for dataset loading and validation errors"""

    pass


class DatasetFormatError(DatasetError):
    """Raised when a row's arity differs from the first row's"""

    def __init__(self, line, expected, got, path=None):
        where = f"{path}:" if path else "line "
        super().__init__(
            f"Ragged row at {where}{line}: expected {expected} fields, got {got}"
        )
        self.line = line
        self.expected = expected
        self.got = got
        self.path = path


class DatasetParseError(DatasetError):
    """Raised when a field cannot be read as a real number"""

    def __init__(self, line, field, value):
        super().__init__(
            f"Cannot parse field {field} on line {line} as a number: {value!r}"
        )
        self.line = line
        self.field = field
        self.value = value


class UnknownLabelError(DatasetError):
    """Raised when a file uses a class label missing from the reference classes"""

    def __init__(self, line, label, known):
        super().__init__(
            f"Unknown class label {label!r} on line {line}; "
            f"known labels: {', '.join(known)}"
        )
        self.line = line
        self.label = label
        self.known = tuple(known)


class DatasetTooSmallError(DatasetError):
    """Raised when a dataset has too few rows or too short series"""

    pass


class SeriesTooShortError(WartemError, ValueError):
    """Raised when a series is shorter than the 4-point warping window"""

    def __init__(self, length, minimum=4):
        super().__init__(f"Series of length {length} is shorter than {minimum}")
        self.length = length
        self.minimum = minimum


class WarpWindowError(WartemError, IndexError):
    """Raised when a warping focus window does not fit inside the series"""

    def __init__(self, start, length):
        super().__init__(
            f"Window start {start} out of range for series of length {length} "
            f"(valid: 0..{length - 4})"
        )
        self.start = start
        self.length = length


class ArgumentError(WartemError, ValueError):
    """Raised for invalid scalar arguments (fractions, bands, epsilons...)"""

    pass


# Network errors
class ShapeError(WartemError, ValueError):
    """Raised when tensor shapes do not match a layer's expectations"""

    pass


class TapeStateError(WartemError):
    """Raised when a gradient tape is consumed more than once"""

    pass


class CheckpointError(WartemError):
    """Raised when a WARTEM1 blob is malformed or truncated"""

    pass


# Configuration errors
class ConfigError(WartemError):
    """Base for configuration errors"""

    pass


class ConfigSyntaxError(ConfigError):
    """Raised when a config file cannot be parsed"""

    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line = line


class UnknownConfigKeyError(ConfigError):
    """Raised when a config file names a key the schema does not know"""

    def __init__(self, key, suggestion=None, line=None):
        message = f"Unknown config key: {key!r}"
        if suggestion:
            message += f" (did you mean {suggestion!r}?)"
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.key = key
        self.suggestion = suggestion
        self.line = line


class MissingConfigKeyError(ConfigError):
    """Raised when a required key has no value and no default"""

    def __init__(self, key):
        super().__init__(f"Missing required config key: {key!r}")
        self.key = key


class InvalidConfigValueError(ConfigError):
    """Raised when a config value cannot be converted to the key's type"""

    def __init__(self, key, value, reason):
        super().__init__(f"Invalid value for {key!r}: {value!r} ({reason})")
        self.key = key
        self.value = value
        self.reason = reason


# Training errors
class DivergenceError(WartemError):
    """Raised when the training loss becomes non-finite"""

    def __init__(self, epoch, batch, value):
        super().__init__(
            f"Non-finite loss {value!r} at epoch {epoch}, batch {batch}"
        )
        self.epoch = epoch
        self.batch = batch
        self.value = value


class TrainingRunError(WartemError):
    """Wraps a failure of one run inside a multi-seed training job"""

    def __init__(self, seed, cause):
        super().__init__(f"Training run with seed {seed} failed: {cause}")
        self.seed = seed
        self.cause = cause


class EvaluationError(WartemError):
    """Raised when models and data do not fit together during evaluation"""

    pass
