"""Exception hierarchy for the charging-station scheduler."""

from typing import Optional


class PebfcsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PebfcsError, ValueError):
    """Input outside the domain of a formula or type."""


class DimensionMismatchError(DomainError):
    """Vectors or matrices whose shapes do not agree with the time grid or fleet."""


class InfeasibleBoundsError(DomainError):
    """Cumulative recharge bounds where the minimum exceeds the maximum."""


class InfeasibleModelError(PebfcsError):
    """A window that cannot be satisfied, detected before or during solving."""

    def __init__(self, message: str, bus: Optional[int] = None, parking: Optional[int] = None):
        super().__init__(message)
        self.bus = bus
        self.parking = parking


class SolverError(PebfcsError):
    """Base class for failures of the MILP kernel or an external solver."""


class NumericalError(SolverError):
    """The simplex lost accuracy; the returned point cannot be trusted."""


class TooManyBinariesError(SolverError):
    """Enumeration refused because the instance has too many free binaries."""


class SolverUnavailableError(SolverError):
    """The external solver executable is not installed."""


class SolverProcessError(SolverError):
    """The external solver exited with a non-zero status."""

    def __init__(self, message: str, returncode: Optional[int], stderr: str = ""):
        super().__init__(message)
        self.returncode = returncode
        self.stderr = stderr


class TransientSolverError(SolverProcessError):
    """The external solver was terminated by a signal; the call may be retried."""


class SolutionParseError(SolverError):
    """The external solver's solution file could not be parsed."""


class ScheduleVerificationError(PebfcsError):
    """A schedule failed re-verification after post-solve cleanup."""


class DispatchInfeasibleError(PebfcsError):
    """Mandatory charging blocks overflow the piles at some interval."""

    def __init__(self, message: str, intervals: Optional[list] = None):
        super().__init__(message)
        self.intervals = intervals or []


class SchedulingConflictError(DomainError):
    """No bus is available for a departure in the generated timetable."""

    def __init__(self, message: str, bus: int, departure: int, available_at: int):
        super().__init__(message)
        self.bus = bus
        self.departure = departure
        self.available_at = available_at


class ScenarioMismatchError(DomainError):
    """Episode results from different scenarios were compared."""
