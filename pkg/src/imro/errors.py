"""Exception types shared across the package."""


class DimensionError(ValueError):
    """A vector length does not match what an operator or problem expects."""

    def __init__(self, what, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected length {expected}, got {actual}")


class NonFiniteError(ValueError):
    """An input contained NaN or infinity."""


class InvariantViolation(RuntimeError):
    """A convergence inequality or construction certificate failed at runtime."""
