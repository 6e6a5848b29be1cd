"""Exception types raised by the lab."""


class LabError(Exception):
    """Base class for every error the lab raises on purpose."""


class DomainError(LabError, ValueError):
    """Argument outside the region where an operation is defined."""


class QuadratureError(LabError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NoConvergenceError(LabError):
    """A root search or shooting iteration failed; carries the best bracket."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class GeodesicTruncated(LabError):
    """Geodesic left the coordinate chart; ``path`` holds the part computed."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class ConjugatePointError(LabError):
    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class IntegratorStepError(LabError):
    """Residual of a consistency identity exceeded its tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class NormalizationMismatchError(LabError):
    """Neumann data is not normalized, so the boundary condition fails."""


class AuditFailure(LabError):
    """An inequality failed on a space whose curvature hypothesis holds."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details


class ScenarioError(LabError):
    """Malformed scenario or family file."""
