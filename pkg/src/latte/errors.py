"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs violate a structural contract (schema, shape, id range)."""


class NumericalError(RuntimeError):
    """Raised when a computation produces non-finite values or fails a numeric check."""
