"""Exception types shared across the package.

Two failure families are kept apart because the command line maps them to
different exit codes: problems with user-supplied inputs (files, schemas,
flag values) and degeneracies that arise during an otherwise valid
computation (for example a rejection analysis on an error-free record set).
"""

__all__ = ["SchemaError", "DegenerateComputationError"]


class SchemaError(ValueError):
    """Raised when an input file or configuration violates its contract."""


class DegenerateComputationError(RuntimeError):
    """Raised when a computation is undefined for the given (valid) input."""
