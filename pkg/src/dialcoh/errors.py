"""Shared exception types for the toolkit."""


class DialcohError(Exception):
    """Base class for all toolkit errors."""


class DataError(DialcohError):
    """Malformed or insufficient input data."""


class CorpusFormatError(DataError):
    """A corpus record that cannot be parsed or violates an invariant."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientPoolError(DataError):
    """Not enough candidate turns to sample the requested negatives."""


class ChecksumError(DataError):
    """Checkpoint payload does not match its recorded checksum."""


class NumericError(DialcohError):
    """Numerical failure: divergence, rank deficiency, non-finite values."""
