"""Exception and warning types raised by the solver stages."""


class MultiperiodicError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGeometryError(MultiperiodicError, ValueError):
    """Nonpositive or inconsistent domain dimensions or mesh sizes."""


class InvalidArgumentError(MultiperiodicError, ValueError):
    pass


class InsufficientBandError(MultiperiodicError, ValueError):
    """Fourier band too narrow to cover one coefficient per component."""


class ShapeError(MultiperiodicError, ValueError):
    pass


class ConfigurationError(MultiperiodicError, ValueError):
    pass


class SingularityError(MultiperiodicError, ValueError):
    """A Green's function was evaluated at its source or image point."""


class DegenerateReferenceError(MultiperiodicError, ValueError):
    pass


class SolverError(MultiperiodicError, RuntimeError):
    """Linear solve failed; carries the achieved relative residual."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []


class StageError(MultiperiodicError, RuntimeError):
    """A pipeline stage failed; `stage` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class WoodAnomalyWarning(RuntimeWarning):
    """A DtN symbol sits exactly at a cutoff (|xi| == k)."""


class TruncationWarning(RuntimeWarning):
    """A truncated lattice sum has an estimated tail above tolerance."""
