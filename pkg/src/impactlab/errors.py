"""Exception classes shared across the toolkit.

Three failure families, matching the CLI's exit-code contract:
validation errors (bad inputs or configuration), I/O errors (plain
OSError, not wrapped), and numerical errors (degenerate data or a
computation that cannot proceed).
"""


class ValidationError(ValueError):
    """Input data, configuration, or precondition violation."""


class NumericalError(RuntimeError):
    """A numerical computation failed (singularity, invariant breach)."""


class DegenerateDataError(NumericalError):
    """Data carries no usable signal (zero variance, all-zero impacts)."""
