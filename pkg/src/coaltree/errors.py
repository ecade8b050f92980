"""Exception types shared across the package."""


class CoaltreeError(Exception):
    """Base class for all package-specific errors."""


class StructuralError(CoaltreeError, ValueError):
    """A tree violates the rooted-binary structural invariants."""


class ConsistencyError(CoaltreeError, ValueError):
    """A derived object (e.g. a Horton analysis) does not belong to the tree
    it was paired with."""


class DomainError(CoaltreeError, ValueError):
    """An argument is outside the operation's domain (bad leaf id, undefined
    kernel mass, out-of-range evaluation point, ...)."""


class DegenerateSeriesError(CoaltreeError, ValueError):
    """A time series is in non-generic position: plateau of equal consecutive
    values, or tied internal local minima.  Never silently perturbed."""


class TreeParseError(CoaltreeError, ValueError):
    """Malformed tree text.  Carries the 0-based offset of the failure."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class SolverError(CoaltreeError, RuntimeError):
    """A numerical solve failed to reach the requested tolerance or horizon.
    ``where`` holds the abscissa at which integration stopped, when known."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where
