"""Exception hierarchy.

CLI exit codes map onto these: validation 2, fit failure 3, I/O 4.
"""


class SquidResError(Exception):
    """Base class for toolkit errors."""


class DomainError(SquidResError, ValueError):
    """An input lies outside the domain where the model is defined."""


class BranchLostError(SquidResError):
    """Newton continuation lost its flux branch (a hysteretic jump point)."""


class ModelError(SquidResError):
    """The forward model has no valid solution for the requested inputs."""


class NoHysteresisError(DomainError):
    """Raised when a jump flux is requested for a non-hysteretic loop (beta_L <= 1)."""


class InsufficientDataError(SquidResError, ValueError):
    pass


class DegenerateGeometryError(SquidResError, ValueError):
    pass


class FitError(SquidResError):
    """A fit did not converge or returned an unusable result."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnphysicalResultError(FitError):
    pass


class UnidentifiableError(FitError):
    pass


class CalibrationError(SquidResError):
    pass


class ConfigError(SquidResError, ValueError):
    pass


class FormatError(SquidResError, ValueError):
    """Malformed or unsupported data file."""
