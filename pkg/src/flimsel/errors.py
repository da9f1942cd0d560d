"""Exception types shared across the package."""


class FlimselError(Exception):
    """Base class for all package-specific errors."""


class DegenerateModelError(FlimselError):
    """Raised when a decay model has zero total intensity."""


class NoSignalError(FlimselError):
    """Raised when signal proportions are requested but I <= I_0."""


class InsufficientDataError(FlimselError):
    """Raised when a fit is attempted on an empty dataset."""


class OptimizerFailureError(FlimselError):
    """Raised when the nested-model likelihood ordering is violated
    beyond tolerance, i.e. the optimizer demonstrably missed the
    bi-exponential optimum."""


class QuadratureError(FlimselError):
    """Raised when adaptive quadrature cannot reach the requested
    tolerance. Carries the achieved tolerance."""

    def __init__(self, message: str, achieved_tolerance: float):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance


class PrecisionError(FlimselError):
    """Raised when a Monte Carlo estimate does not reach the requested
    confidence-interval width (needs more samples)."""

    def __init__(self, message: str, achieved_ci_halfwidth: float):
        super().__init__(message)
        self.achieved_ci_halfwidth = achieved_ci_halfwidth


class DatasetFormatError(FlimselError):
    """Raised on malformed dataset files; names the offending line."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number
