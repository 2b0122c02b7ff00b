"""Exception types shared across the package."""


class McarsenseError(Exception):
    """Base class for all package errors."""


class ParameterError(McarsenseError, ValueError):
    """An argument is outside its admissible range."""


class DomainError(McarsenseError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class DegenerateMeasureError(McarsenseError, ValueError):
    """A measure required to be non-degenerate carries no usable mass."""


class BoundaryError(McarsenseError, ValueError):
    """A probability parameter sits on a boundary where the map is undefined."""


class NumericError(McarsenseError, ArithmeticError):
    """A computation collapsed numerically (underflow, all-zero weights, ...)."""


class AccuracyError(McarsenseError, ArithmeticError):
    """Requested accuracy could not be reached.

    Carries the best available estimate and the attained error bound so
    callers can decide whether the result is still usable.
    """

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class MixingFailureError(McarsenseError, RuntimeError):
    """An MCMC chain failed to move despite adaptation."""


class SampleSizeError(McarsenseError, ValueError):
    """Too few samples/draws to carry out the requested computation."""


class InconsistentRecordError(McarsenseError, ValueError):
    """An (x, r) record violates the missing-data conventions."""


class ConfigError(McarsenseError, ValueError):
    """A run configuration failed schema or semantic validation."""
