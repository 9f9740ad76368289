"""Exception hierarchy shared across the package.

Schema problems (bad scenario files) and numerical/domain problems are kept
on separate branches so the CLI can map them to distinct exit codes.
"""


class DriftLabError(Exception):
    """Base class for all package errors."""


class SchemaError(DriftLabError):
    """A scenario or law description violates the documented schema."""


class DomainError(DriftLabError):
    """Base class for numerical / domain errors (CLI exit code 3)."""


class StructuralError(DomainError):
    """A matrix or model violates a structural requirement (e.g. reducibility)."""


class NotCriticalError(DomainError):
    """The drift does not average to zero, so the critical-regime machinery
    does not apply; the constant-drift classification should be used instead."""


class DegenerateVarianceError(DomainError):
    """Effective variance V is zero (or negative), no moment threshold exists."""


class RegimeMismatchError(DomainError):
    """Regression residuals show the model does not follow the requested
    drift regime at the probe points."""


class IllPosedProfileError(DomainError):
    """A transformed variance came out negative: the profile is inconsistent."""


class InsufficientDataError(DomainError):
    """Not enough (uncensored) samples for the requested estimate."""


class ConfigurationError(DomainError):
    """Numerical configuration is unusable (e.g. grid too coarse for rho)."""


class QuadratureError(DomainError):
    """Numerical integration failed to converge."""


class OffLatticeError(DomainError):
    """A simulated sample fell off the declared lattice: (H, b) is wrong."""
