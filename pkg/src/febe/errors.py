"""Exception and warning types shared across the package."""


class FebeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FebeError, ValueError):
    """An argument lies outside the domain of the operation."""


class CutoffError(FebeError):
    """The sideband cutoff or grid window loses too much norm."""

    def __init__(self, message, deficit):
        super().__init__(f"{message} (norm deficit {deficit:.3e})")
        self.deficit = deficit


class GridResolutionError(FebeError):
    """A momentum shift is not representable on the grid."""


class OffResonanceError(FebeError):
    """A closed form that requires resonance was called off resonance."""


class StepSizeError(FebeError, ValueError):
    """Integrator step too coarse for the time scales of the problem."""


class ConfigError(FebeError):
    """Invalid run configuration (unknown key, bad value, unit mismatch)."""


class PerturbativeWarning(UserWarning):
    """Coupling is large enough that second-order perturbation theory is suspect."""


class RegimeWarning(UserWarning):
    """A closed form is evaluated outside the regime it was derived for."""
