"""Exception hierarchy shared across the package."""


class DoseDesignError(Exception):
    """Base class for all package errors."""


class DimensionError(DoseDesignError):
    """Inputs have mutually inconsistent shapes."""


class DegenerateDoseError(DoseDesignError):
    """A (theta, dose) pair produces category probabilities at or below zero."""


class SingularInformationError(DoseDesignError):
    """An information matrix required to be invertible is numerically singular."""


class NoRootError(DoseDesignError):
    """A root-finding bracket contains no sign change."""


class SingularEndpointError(DoseDesignError):
    """The implicit-function denominator vanishes at an endpoint root."""


class FitError(DoseDesignError):
    """Maximum-likelihood fitting failed."""


class SeparationError(FitError):
    """The MLE is unbounded or the data cannot identify the parameters."""


class ConvergenceError(FitError):
    """The optimizer did not converge within the iteration budget."""


class DesignError(DoseDesignError):
    """A design violates its invariants (weights, support, box)."""


class ValidationError(DoseDesignError):
    """User-supplied input (CSV row, config field) failed validation."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SwarmInitError(DoseDesignError):
    """Every particle evaluated to a sentinel at initialization."""
