"""Exception types shared across the package."""

__all__ = ["ConfigurationError", "SolverError"]


class ConfigurationError(ValueError):
    """Invalid configuration or argument outside an operation's domain."""


class SolverError(RuntimeError):
    """A numerical solve failed to meet its accuracy contract."""
