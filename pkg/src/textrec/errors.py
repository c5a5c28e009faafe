"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class TapeStateError(RuntimeError):
    """Tape misuse: backward without recording, or replay without reset."""


class OptimStateError(RuntimeError):
    """Optimizer state inconsistent with parameters (e.g. missing gradient)."""


class ParseError(ValueError):
    """Malformed interaction-log line; carries the 1-based line number."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class FormatError(ValueError):
    """Corrupt or unsupported binary file; names the failing byte offset."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class CoverageError(ValueError):
    """Vocabulary tokens missing from an embedding matrix."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class ModeError(RuntimeError):
    """Operation requires a model mode or parameter that is not present."""


class CheckpointError(ValueError):
    """Checkpoint incompatible with the requested model configuration."""


class ConfigError(ValueError):
    """Unknown or invalid run-configuration key."""


class MetricsError(ValueError):
    """Metric request over an empty or inconsistent report."""


class TrainingDivergedError(RuntimeError):
    """Loss became NaN/Inf; carries the diagnostic context."""
