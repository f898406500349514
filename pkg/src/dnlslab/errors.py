"""Exception types shared across the package."""


class DnlsLabError(Exception):
    """Base class for all package errors."""


class InputError(DnlsLabError):
    """Rejected input data (non-finite samples, bad parameters)."""


class SingularSymbolError(DnlsLabError):
    """A Fourier multiplier is singular or non-finite at a grid frequency."""


class WindowError(DnlsLabError):
    """Requested frequency window exceeds the grid."""


class TruncationError(DnlsLabError):
    """Windowed values failed to agree across window doubling.

    Carries both values so callers can report the discrepancy.
    """

    def __init__(self, message, value_small, value_large):
        super().__init__(message)
        self.value_small = value_small
        self.value_large = value_large


class GuardError(DnlsLabError):
    """The resolvent guard sqrt(kappa)*||Lambda||_op < 1/2 failed."""

    def __init__(self, message, kappa=None, guard_value=None):
        super().__init__(message)
        self.kappa = kappa
        self.guard_value = guard_value


class ResolutionLossError(DnlsLabError):
    """Spectral mass reached the top octave during time stepping."""


class StepInstabilityError(DnlsLabError):
    """Non-finite values appeared during time stepping."""


class ConfigError(DnlsLabError):
    """Invalid run configuration."""
