"""Exception hierarchy shared across the package.

CLI exit-code mapping: ConfigError and ContractError terminate a command
with exit code 2, CompatibilityError with exit code 3.
"""


class LevtError(Exception):
    """Base class for all package errors."""


class ShapeError(LevtError):
    """Tensor dimension mismatch."""


class ConfigError(LevtError):
    """Invalid configuration or command usage."""


class ContractError(LevtError):
    """A documented precondition was violated by the caller."""


class CompatibilityError(LevtError):
    """Artifacts (checkpoint, vocabulary, corpus) do not fit together."""


class DivergenceError(LevtError):
    """Training produced a non-finite loss."""
