"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside its valid domain (non-positive rate, bad policy, ...)."""


class InstabilityError(ValueError):
    """The requested queueing configuration has no steady state (load >= capacity)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge to its requested tolerance."""
