"""Exception hierarchy shared across the package.

Every error raised by the library derives from :class:`ScanBeamError` so the
service layer and the CLI can map failures to exit codes without inspecting
messages: configuration problems exit with 2, numerical failures with 3, and
"nothing there" outcomes with 4.
"""


class ScanBeamError(Exception):
    """Base class for all library errors."""


class ConfigError(ScanBeamError):
    """A run configuration is malformed or inconsistent."""


class InvalidDirection(ScanBeamError):
    """A direction vector is zero, has the wrong length, or is not unit."""


class InvalidSpherePoint(ScanBeamError):
    """A point expected on the measurement sphere is too far from it."""


class DimensionMismatch(ScanBeamError):
    """An operation was called outside the dimensions it supports."""


class OutsideDomain(ScanBeamError):
    """A coupling-ratio evaluation outside the shell or outside its sector."""


class OutsideBeamSupport(ScanBeamError):
    """A simulated measurement was requested for a direction the beam misses."""


class EmptyCouplingSet(ScanBeamError):
    """A query point has no coupled partners (it is not a coupled frequency)."""


class DegenerateVertex(ScanBeamError):
    """A graph query point sits on one of the excluded measure-zero sets."""


class InconsistentComponent(ScanBeamError):
    """A component violates a structural invariant (for example a directly
    recoverable vertex inside a component with more than two vertices)."""


class NewtonDiverged(ScanBeamError):
    """The shifted-anchor Newton solve did not reach the residual target."""


class LeftDomain(ScanBeamError):
    """A Newton solution wandered off the coupled sector of the sphere."""


class DegenerateAnchor(ScanBeamError):
    """An anchor pair is geometrically degenerate (dependent directions)."""


class DegenerateDirection(ScanBeamError):
    """A probe direction makes the local frame singular."""


class SingularPair(ScanBeamError):
    """A two-point system has (numerically) equal coupling values."""


class CertificateInvalid(ScanBeamError):
    """A constructed non-uniqueness witness failed its own verification."""


class InvalidSlice(ScanBeamError):
    """A requested planar slice is malformed (non-orthonormal axes)."""
