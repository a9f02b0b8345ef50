"""Exception types shared across the pipeline."""


class BlowupSpecError(Exception):
    """Base class for library errors."""


class DomainError(BlowupSpecError, ValueError):
    """Input outside the supported parameter region."""


class RangeError(BlowupSpecError, OverflowError):
    """Result would overflow or underflow even in scaled form."""


class ConvergenceError(BlowupSpecError, RuntimeError):
    """An iterative solve did not converge."""


class ConfigError(BlowupSpecError, ValueError):
    """Invalid run configuration; the message names the offending field."""
