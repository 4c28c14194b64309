"""Exception types raised across the package."""


class BetheForgeError(Exception):
    """Base class for all package errors."""


class NonvanishingPole(BetheForgeError):
    """A Laurent jet had a nonzero coefficient at a negative order."""


class ExactDivisionFailed(BetheForgeError):
    """A polynomial or operator division left a nonzero remainder."""


class PoleHit(BetheForgeError):
    """A spectral or generating-function argument sits exactly on a pole."""


class DimMismatch(BetheForgeError):
    """Operators of different shapes were combined."""


class BadSite(BetheForgeError):
    """A tensor-site index is out of range."""


class DegreeOverflow(BetheForgeError):
    """An operator entry exceeded the degree bound it must satisfy."""


class InsufficientPrecision(BetheForgeError):
    """A truncated expansion was not carried far enough to read off a value."""


class ConfigError(BetheForgeError):
    """Invalid user configuration (bad twist, unknown suite, size guard)."""


class DegenerateSpectrum(BetheForgeError):
    """Numerical diagonalization could not separate the joint spectrum."""


class RootCollision(BetheForgeError):
    """Two Bethe roots coincide within tolerance."""


class LeadingCoeffUnderflow(BetheForgeError):
    """The leading coefficient of an eigenvalue polynomial is numerically zero."""
