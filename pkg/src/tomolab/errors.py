"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates a structural contract (schema, completeness, shape)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (optimizer exhausted, inconsistent values)."""
