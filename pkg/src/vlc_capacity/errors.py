"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of budget before meeting its tolerance.

    The best available estimate is kept on ``estimate`` so callers can decide
    whether it is good enough for their purpose.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SolverError(RuntimeError):
    """A distribution parameter could not be solved for."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class FeasibilityError(ValueError):
    """A candidate density violates the normalization or mean constraint."""
