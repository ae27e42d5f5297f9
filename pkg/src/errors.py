"""Error hierarchy shared by every TLSRec component."""


class TLSRecError(Exception):
    """Base class for all errors raised by the package."""

    error_class = "TLSRecError"


class DimensionError(TLSRecError, ValueError):
    """Operand shapes are incompatible for a tensor primitive."""

    error_class = "DimensionError"


class InvalidMaskError(TLSRecError, ValueError):
    """An attention mask excludes every key of some row."""

    error_class = "InvalidMaskError"


class ContractError(TLSRecError, ValueError):
    """A documented precondition was violated by the caller."""

    error_class = "ContractError"


class EmbeddingIndexError(TLSRecError, IndexError):
    """An item, user or time-lag index falls outside its lookup table."""

    error_class = "EmbeddingIndexError"


class InteractionParseError(TLSRecError, ValueError):
    """A raw interaction log row could not be parsed."""

    error_class = "InteractionParseError"

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DataOrderingError(TLSRecError, ValueError):
    """Interactions are ordered such that a time lag would be negative."""

    error_class = "DataOrderingError"


class ConfigError(TLSRecError, ValueError):
    """A run configuration is invalid."""

    error_class = "ConfigError"


class CheckpointError(TLSRecError, OSError):
    """A checkpoint is unreadable or has the wrong format."""

    error_class = "CheckpointError"


class InstanceFileError(TLSRecError, ValueError):
    """An instance file is malformed or of another format version."""

    error_class = "InstanceFileError"


class DivergenceError(TLSRecError, ArithmeticError):
    """Training produced a non-finite loss."""

    error_class = "DivergenceError"


class SelectorError(TLSRecError, LookupError):
    """An instance selector matched nothing."""

    error_class = "SelectorError"


class InputFileError(TLSRecError, OSError):
    """A raw input file is missing or unreadable."""

    error_class = "InputFileError"
