"""Exception types raised across the package."""


class ReplicatorError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(ReplicatorError, ValueError):
    pass


class DomainError(ReplicatorError, ValueError):
    """A time or state argument lies outside the region where a quantity is defined."""


class NotPositiveDefiniteError(ReplicatorError, ValueError):
    pass


class DivergenceError(ReplicatorError, ArithmeticError):
    """A singular integral failed to converge."""


class InvalidDiffusionError(ReplicatorError, ValueError):
    pass


class GridError(ReplicatorError, ValueError):
    pass


class ExtrapolationError(ReplicatorError, ValueError):
    """State requested outside the grid of a PDE solution."""


class ConfigError(ReplicatorError, ValueError):
    """Raised by config parsing; ``violations`` holds every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
