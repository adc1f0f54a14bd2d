from typing import List, Optional


class MuDPError(Exception):
    """Base class for all errors raised by the laboratory."""


class GridError(MuDPError, ValueError):
    """Invalid grid size or non-finite samples."""


class DiffeomorphismError(MuDPError):
    """A lift that is not (numerically) a circle diffeomorphism."""

    def __init__(self, message: str, min_slope: Optional[float] = None):
        super().__init__(message)
        self.min_slope = min_slope


class LinearSolveError(MuDPError):
    """The dense conjugated solve failed."""

    def __init__(self, message: str, condition: Optional[float] = None):
        super().__init__(message)
        self.condition = condition


class SolverFailure(MuDPError):
    """Non-finite values appeared during time stepping."""


class OutOfDomainError(MuDPError):
    """The geodesic left the resolvable domain before the requested time."""


class InsufficientSnapshotDensity(MuDPError):
    """A time quadrature needs snapshots at every step."""


class InitExprError(MuDPError, ValueError):
    """Rejected initial-data expression, with the offending position."""

    def __init__(
        self, message: str, position: int, expected: Optional[List[str]] = None
    ):
        super().__init__(f"{message} (at position {position})")
        self.reason = message
        self.position = position
        self.expected = expected or []


class ConvergenceSpecError(MuDPError, ValueError):
    """Malformed refinement ladder."""
