"""Exception hierarchy shared by all modules."""


class RslpError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(RslpError, ValueError):
    """Array shapes or counts are invalid or inconsistent."""


class ParameterError(RslpError, ValueError):
    """A scalar parameter is out of its admissible range."""


class ModulationError(RslpError, ValueError):
    """A symbol does not have unit modulus."""


class GeometryError(RslpError, ValueError):
    """The CI half-angle is outside (0, pi/2)."""


class NumericalError(RslpError, ArithmeticError):
    """A numerical routine failed to produce a valid result."""


class DomainError(RslpError, ValueError):
    """A point lies outside the domain where a quantity is defined."""


class InfeasibleError(RslpError):
    """No strictly feasible precoder could be found.

    ``max_margin`` holds the largest constraint margin of the best candidate.
    """

    def __init__(self, message, max_margin=float("nan")):
        super().__init__(message)
        self.max_margin = float(max_margin)


class StateError(RslpError, RuntimeError):
    """An object was used in the wrong state (e.g. backward before forward)."""


class FormatError(RslpError, ValueError):
    """A binary file is malformed. ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset=-1):
        super().__init__(f"{message} (offset {offset})" if offset >= 0 else message)
        self.offset = offset


class TrainingDivergedError(RslpError, RuntimeError):
    """Training produced a non-finite loss. ``trace`` holds the rows so far."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)
