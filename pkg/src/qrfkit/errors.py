"""Exception types shared across the toolkit."""


class QRFError(Exception):
    """Base class for all toolkit errors."""


class IncommensurableSpectrum(QRFError):
    """A generator eigenvalue does not lie on the frame momentum lattice."""


class NotAFrameFactor(QRFError):
    """Operation requires a frame factor but got a system factor."""


class EmptyKernel(QRFError):
    """The constraint has no zero eigenvalue; no physical states exist."""


class NegativeGenerator(QRFError):
    """A generator required to be positive semi-definite has a negative eigenvalue."""


class IndexOutOfRange(QRFError, IndexError):
    """Grid index outside the orientation grid."""


class UnsupportedForm(QRFError):
    """Requested closed-form relational observable on a non-ideal frame."""


class SameFrame(QRFError):
    """QRF transformation requires two distinct frames."""


class UnsupportedSupport(QRFError):
    """Operator support incompatible with the requested transformation."""


class NotPhysical(QRFError):
    """State is not annihilated by the constraint within tolerance."""


class IllConditionedFlow(QRFError):
    """Gauge-flow exponent too large for a reliable matrix exponential."""


class OrderingViolation(QRFError):
    """Element not in the ordering required by the frame-change formula."""


class DegreeExceeded(QRFError):
    """Polynomial degree exceeds the configured bound."""


class RelationViolation(QRFError):
    """A represented commutation relation fails beyond tolerance."""


class InsufficientTower(QRFError):
    """Constraint tower truncated too low to solve for a requested variable."""


class NearZeroEnergy(QRFError):
    """Square-root expansion of the system generator is invalid near zero."""


class StepTooLarge(QRFError):
    """Moment-flow integration diverged; reduce the step size."""


class ConfigError(QRFError):
    """Invalid run configuration."""
