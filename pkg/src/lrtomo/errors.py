"""Exception types shared across the package.

The CLI maps these onto exit codes: validation problems exit with 2,
numerical non-convergence with 3, and enumeration-cap refusals with 4.
"""


class ValidationError(ValueError):
    """Input data violates a structural invariant (shape, Hermiticity, ...)."""


class DomainError(ValueError):
    """An operation was evaluated outside its mathematical domain."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its stopping tolerance."""


class EnumerationCapError(RuntimeError):
    """An exhaustive enumeration would exceed the configured cap."""

    def __init__(self, message: str, count: int, cap: int):
        super().__init__(message)
        self.count = count
        self.cap = cap
