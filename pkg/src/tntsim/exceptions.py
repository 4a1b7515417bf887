"""Exception types shared across the package."""


class TntError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TntError):
    """Invalid or inconsistent experiment configuration."""


class NumericsError(TntError):
    """A numerical procedure could not be carried out safely."""


class StepSizeError(NumericsError):
    """Requested integrator step is too large for the operator norm.

    Carries a suggested safe step in ``suggested_dt`` (seconds).
    """

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class PoleError(NumericsError):
    """Classical phase-space point at |z| = 1 where the azimuth is undefined."""


class NoUnstablePointError(TntError):
    """No unstable equatorial fixed point exists for the given parameters."""


class NoSeparatrixError(TntError):
    """No separatrix exists (coupling-dominated regime)."""


class ImpossibleJumpError(TntError):
    """Loss jump with exactly zero amplitude on the current state."""


class DegeneratePolarizationError(TntError):
    """All atoms in one mode; the binomial reference variance vanishes."""
