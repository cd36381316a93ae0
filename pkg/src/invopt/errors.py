"""Exception types shared across the package."""


class InvoptError(Exception):
    """Base class for all package errors."""


class DomainError(InvoptError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ValidationError(InvoptError, ValueError):
    """A data record violates one of its declared invariants."""


class ParseError(InvoptError, ValueError):
    """A file could not be parsed; the message names the offending line."""


class ConfigError(InvoptError, ValueError):
    """Inconsistent or incomplete run configuration."""


class NumericalError(InvoptError, ArithmeticError):
    """A numerical procedure failed (singular matrix, non-PSD kernel, ...)."""
