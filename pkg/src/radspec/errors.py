"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class AccuracyFailure(ArithmeticError):
    """A requested value cannot be delivered at the promised accuracy."""


class DivergenceError(ArithmeticError):
    """An integral or series that was asked for does not converge."""


class UnresolvedRegion(RuntimeError):
    """Root search left part of the search region unresolved."""

    def __init__(self, message, regions=()):
        super().__init__(message)
        self.regions = list(regions)
