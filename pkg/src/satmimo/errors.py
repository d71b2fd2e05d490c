"""Shared exception types."""


class ConfigError(ValueError):
    """Malformed configuration text (bad syntax, unknown or ill-typed key)."""


class ValidationError(ValueError):
    """A configuration value or input violates a documented invariant."""


class InfeasibleError(RuntimeError):
    """A constraint system admits no solution within the search budget."""


class NumericsError(RuntimeError):
    """A numerical precondition failed, e.g. a matrix that must be positive
    definite is not."""
