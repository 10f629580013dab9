"""Exception hierarchy shared across the package."""


class BeamQuboError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(BeamQuboError, ValueError):
    """Input outside its documented range, or mismatched dimensions."""


class DegenerateGeometryError(BeamQuboError):
    """A direction vector has zero length (user coincides with the satellite)."""


class CapacityError(BeamQuboError):
    """Problem size exceeds a configured hard cap (enumeration, annealer, ...)."""


class LpInfeasibleError(BeamQuboError):
    """The linear program has no feasible point.

    ``row_name`` identifies a constraint row that could not be satisfied.
    """

    def __init__(self, message: str, row_name: str | None = None):
        super().__init__(message)
        self.row_name = row_name


class LpIterationLimitError(BeamQuboError):
    """Simplex exceeded its iteration budget."""


class LpUnboundedError(BeamQuboError):
    """The linear program's objective is unbounded below (precondition breach)."""


class BudgetExhaustedError(BeamQuboError):
    """Best Fit needed to open more beams than the budget allows."""


class TransportError(BeamQuboError):
    """Network or authentication failure talking to a remote solver."""


class ProtocolError(BeamQuboError):
    """Remote solver answered with a malformed or inconsistent payload."""


class FormatError(BeamQuboError):
    """A data file does not match its expected schema."""
