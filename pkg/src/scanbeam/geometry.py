"""Sphere and half-space geometry underlying the scan analysis.

Everything is phrased in frequency space. Directions live on the sphere of
radius ``k0``, half-spaces are open, and every membership predicate is strict
up to an explicit tolerance carried by the scan configuration. This module
owns the configuration object plus the sphere/half-space intersection
machinery that the region, graph and reconstruction layers build on.

Conventions
-----------
* 2D angles are measured counterclockwise from the positive x-axis.
* 3D points use spherical angles (theta, phi) with theta the polar angle from
  the last axis and phi the azimuth in the xy-plane.
* Arc sets on a circle are unions of open angle intervals inside [0, 2*pi];
  wrapped arcs are stored split at 0.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    InvalidDirection,
    InvalidSpherePoint,
)

TWO_PI = 2.0 * math.pi

#: Relative distance from the sphere tolerated before snapping fails.
SPHERE_SNAP_RTOL = 1e-10

#: Default strict-inequality tolerance for open-set membership.
DEFAULT_TOL = 1e-12

#: Largest ambient dimension the package supports.
MAX_DIMENSION = 6


def unit(v):
    """Return ``v`` normalized to unit length."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise InvalidDirection("zero vector has no direction")
    return v / n


@dataclasses.dataclass(frozen=True)
class ScanConfig:
    """Geometry of one scan: dimension, wave number, beam and scan normals.

    Parameters
    ----------
    d : int
        Ambient dimension, between 2 and 6.
    k0 : float
        Wave number; all frequency directions live on the sphere of this
        radius.
    omega : array_like
        Beam axis. Renormalized to unit length on construction.
    nu : array_like
        Scan normal defining the reflection that couples measurements.
        Renormalized to unit length on construction.
    chi : float, optional
        Relative half-width of the radial shell on which the coupling ratio
        extends, in (0, 1).
    tol : float, optional
        Strict-inequality tolerance; length comparisons scale it by ``k0``.
    """

    d: int
    k0: float
    omega: np.ndarray
    nu: np.ndarray
    chi: float = 0.5
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not isinstance(self.d, int) or not 2 <= self.d <= MAX_DIMENSION:
            raise ConfigError(f"dimension must be an integer in [2, {MAX_DIMENSION}], got {self.d!r}")
        if not self.k0 > 0.0:
            raise ConfigError(f"wave number must be positive, got {self.k0!r}")
        if not 0.0 < self.chi < 1.0:
            raise ConfigError(f"shell width chi must lie in (0, 1), got {self.chi!r}")
        if not self.tol > 0.0:
            raise ConfigError(f"tolerance must be positive, got {self.tol!r}")
        for name in ("omega", "nu"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (self.d,):
                raise ConfigError(f"{name} must have shape ({self.d},), got {v.shape}")
            try:
                v = unit(v)
            except InvalidDirection:
                raise ConfigError(f"{name} must be a nonzero vector") from None
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @property
    def e_last(self):
        """Unit vector along the last coordinate axis (the receiver axis)."""
        e = np.zeros(self.d)
        e[-1] = 1.0
        return e

    @property
    def h_omega(self):
        """The beam axis reflected by the scan normal."""
        return householder_reflect(self.nu, self.omega)

    @property
    def membership_tol(self):
        """Absolute tolerance for strict half-space margins, ``tol * k0``."""
        return self.tol * self.k0

    @property
    def snap_tol(self):
        """Absolute distance from the sphere tolerated when snapping."""
        return SPHERE_SNAP_RTOL * self.k0


def householder_reflect(v, x):
    """Reflect ``x`` across the hyperplane orthogonal to the unit vector ``v``.

    The map is an involution and an isometry; its fixed points are exactly
    the hyperplane orthogonal to ``v``.
    """
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != v.shape[0]:
        raise DimensionMismatch(f"cannot reflect shape {x.shape} across shape {v.shape}")
    if abs(np.dot(v, v) - 1.0) > 1e-12:
        raise InvalidDirection("reflection normal must be a unit vector")
    return x - 2.0 * (x @ v)[..., None] * v if x.ndim > 1 else x - 2.0 * np.dot(x, v) * v


def half_space_contains(v, x, tol=DEFAULT_TOL):
    """Strict membership of ``x`` in the open half-space ``<x, v> > 0``.

    ``v`` need not be unit, only nonzero. ``tol`` is the absolute margin
    required of the inner product.
    """
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise InvalidDirection("half-space normal must be nonzero")
    return bool(np.dot(np.asarray(x, dtype=float), v) > tol)


def snap_to_sphere(cfg, x):
    """Project ``x`` onto the sphere of radius ``k0``.

    Raises
    ------
    InvalidSpherePoint
        If ``x`` is farther than ``1e-10 * k0`` from the sphere.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.d,):
        raise DimensionMismatch(f"expected a point of shape ({cfg.d},), got {x.shape}")
    n = np.linalg.norm(x)
    if abs(n - cfg.k0) > cfg.snap_tol:
        raise InvalidSpherePoint(f"|x| = {n:.17g} is not within {cfg.snap_tol:g} of k0 = {cfg.k0:g}")
    return x * (cfg.k0 / n)


def hemisphere_contains(cfg, v, s):
    """Whether ``s`` lies on the open hemisphere of the ``k0``-sphere facing ``v``.

    Requires ``s`` to be on the sphere within the snap tolerance and strictly
    on the positive side of ``v`` by more than ``tol * k0``.
    """
    s = np.asarray(s, dtype=float)
    if abs(np.linalg.norm(s) - cfg.k0) > cfg.snap_tol:
        return False
    return half_space_contains(v, s, cfg.membership_tol)


class SigmaClass(enum.Enum):
    """Classification of an incident direction relative to the coupling."""

    NOT_IN_S_OMEGA = "not_in_s_omega"
    SIGMA1 = "sigma1"
    SIGMA2 = "sigma2"


def sigma_margins(cfg, s):
    """Decision margins for :func:`classify_sigma`.

    Returns ``(<s, omega>, <H s, omega>)`` where ``H`` is the reflection by
    the scan normal. A point is tolerance-ambiguous when either margin is
    within ``tol * k0`` of zero.
    """
    s = np.asarray(s, dtype=float)
    return float(np.dot(s, cfg.omega)), float(np.dot(householder_reflect(cfg.nu, s), cfg.omega))


def classify_sigma(cfg, s):
    """Classify a sphere point as uncoupled, coupled, or outside the beam.

    A direction on the beam hemisphere is coupled (``SIGMA2``) when its
    reflection also lies on the beam hemisphere, uncoupled (``SIGMA1``)
    otherwise. The coupled set is closed under the reflection. Points whose
    reflection margin is within tolerance of zero classify as ``SIGMA1`` by
    the strict reading; use :func:`sigma_margins` to detect that ambiguity.

    Raises
    ------
    InvalidSpherePoint
        If ``s`` is not on the sphere within the snap tolerance.
    """
    s = snap_to_sphere(cfg, s)
    m_beam, m_reflected = sigma_margins(cfg, s)
    if m_beam <= cfg.membership_tol:
        return SigmaClass.NOT_IN_S_OMEGA
    if m_reflected > cfg.membership_tol:
        return SigmaClass.SIGMA2
    return SigmaClass.SIGMA1


def perp_basis(v):
    """Deterministic orthonormal basis of the hyperplane orthogonal to ``v``.

    Coordinate axes least aligned with ``v`` seed the Gram-Schmidt sweep, so
    axis-aligned inputs yield the remaining coordinate axes unchanged.
    """
    v = unit(v)
    d = v.size
    rows = []
    for i in np.argsort(np.abs(v), kind="stable"):
        w = np.zeros(d)
        w[i] = 1.0
        w -= v * v[i]
        for b in rows:
            w -= b * np.dot(b, w)
        n = np.linalg.norm(w)
        if n > 1e-8:
            rows.append(w / n)
        if len(rows) == d - 1:
            break
    return np.array(rows)


class _WholeSphere:
    """Sentinel for the degenerate shift ``y = 0`` where both spheres coincide."""

    __slots__ = ()

    def __repr__(self):  # pragma: no cover - cosmetic
        return "WHOLE_SPHERE"


WHOLE_SPHERE = _WholeSphere()


@dataclasses.dataclass(frozen=True)
class CircleFrame:
    """A centered sphere inside an affine subspace.

    ``axes`` holds orthonormal rows spanning the directions of the subspace
    around ``center``; the frame describes ``{center + radius * sum(u_i *
    axes[i]) : |u| = 1}``, a sphere of dimension ``len(axes) - 1``.
    """

    center: np.ndarray
    radius: float
    axes: np.ndarray
    codim: int

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        axes = np.asarray(self.axes, dtype=float)
        if self.radius < 0.0:
            raise ConfigError("frame radius must be nonnegative")
        gram = axes @ axes.T
        if not np.allclose(gram, np.eye(axes.shape[0]), atol=1e-12):
            raise ConfigError("frame axes must be orthonormal")
        center.flags.writeable = False
        axes.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "axes", axes)

    @property
    def sphere_dim(self):
        return self.axes.shape[0] - 1

    def point(self, theta):
        """Point at angle ``theta`` when the frame holds a circle (two axes)."""
        if self.axes.shape[0] != 2:
            raise DimensionMismatch("angle parametrization needs exactly two axes")
        return self.center + self.radius * (math.cos(theta) * self.axes[0] + math.sin(theta) * self.axes[1])


def sphere_pair_intersection(cfg, y):
    """Intersect the ``k0``-sphere with its copy shifted by ``-y``.

    The set ``{|s| = k0} ∩ {|s + y| = k0}`` is a sphere of dimension
    ``d - 2`` centered at ``-y/2`` with radius ``sqrt(k0^2 - |y|^2 / 4)``
    inside the hyperplane orthogonal to ``y``.

    Returns
    -------
    CircleFrame, WHOLE_SPHERE or None
        ``WHOLE_SPHERE`` when ``|y|`` is within tolerance of zero, ``None``
        when ``|y|`` exceeds ``2 k0`` beyond tolerance (empty intersection),
        and a radius-0 frame at exact tangency.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (cfg.d,):
        raise DimensionMismatch(f"expected a shift of shape ({cfg.d},), got {y.shape}")
    ny = np.linalg.norm(y)
    if ny <= cfg.membership_tol:
        return WHOLE_SPHERE
    if ny > 2.0 * cfg.k0 + cfg.membership_tol:
        return None
    r2 = cfg.k0 ** 2 - 0.25 * ny ** 2
    radius = math.sqrt(r2) if r2 > 0.0 else 0.0
    return CircleFrame(center=-0.5 * y, radius=radius, axes=perp_basis(y), codim=1)


def sphere_pair_points(cfg, y):
    """The at most two intersection points in dimension 2.

    Ordered deterministically as center minus then plus the radius along the
    frame axis; a tangent intersection yields a single point.
    """
    if cfg.d != 2:
        raise DimensionMismatch("point enumeration of the sphere pair is a 2D operation")
    frame = sphere_pair_intersection(cfg, y)
    if frame is None:
        return []
    if frame is WHOLE_SPHERE:
        raise InvalidSpherePoint("zero shift intersects in the whole circle")
    axis = frame.axes[0]
    if frame.radius <= cfg.snap_tol:
        return [frame.center]
    return [frame.center - frame.radius * axis, frame.center + frame.radius * axis]


# --------------------------------------------------------------------------
# arc sets on a circle

def _normalize_interval(lo, hi):
    """Split a possibly wrapped open interval into pieces inside [0, 2*pi]."""
    length = hi - lo
    if length <= 0.0:
        return []
    if length >= TWO_PI:
        return [(0.0, TWO_PI)]
    lo = lo % TWO_PI
    hi = lo + length
    if hi <= TWO_PI:
        return [(lo, hi)]
    return [(0.0, hi - TWO_PI), (lo, TWO_PI)]


@dataclasses.dataclass(frozen=True)
class ArcSet:
    """Union of disjoint open angle intervals inside [0, 2*pi], sorted."""

    intervals: tuple = ()

    @classmethod
    def full(cls):
        return cls(((0.0, TWO_PI),))

    @classmethod
    def from_interval(cls, lo, hi):
        """Build from one open interval, wrapping and splitting as needed."""
        return cls(tuple(sorted(_normalize_interval(lo, hi))))

    @property
    def is_empty(self):
        return not self.intervals

    @property
    def measure(self):
        return sum(hi - lo for lo, hi in self.intervals)

    def contains(self, theta, tol=0.0):
        t = theta % TWO_PI
        for lo, hi in self.intervals:
            if lo - tol < t < hi + tol:
                return True
        # an arc wrapped across 0 == 2*pi is stored split; the seam point is
        # interior to the original arc, so adjacency there counts
        if self.intervals:
            lo0 = self.intervals[0][0]
            hin = self.intervals[-1][1]
            if lo0 <= 1e-15 and hin >= TWO_PI - 1e-15 and (t <= tol or t >= TWO_PI - tol):
                return True
        return False

    def intersect(self, other):
        out = []
        for lo1, hi1 in self.intervals:
            for lo2, hi2 in other.intervals:
                lo, hi = max(lo1, lo2), min(hi1, hi2)
                if hi > lo:
                    out.append((lo, hi))
        return ArcSet(tuple(sorted(out)))

    def complement(self):
        """Interior of the complement within [0, 2*pi]."""
        out = []
        cursor = 0.0
        for lo, hi in self.intervals:
            if lo > cursor:
                out.append((cursor, lo))
            cursor = max(cursor, hi)
        if cursor < TWO_PI:
            out.append((cursor, TWO_PI))
        return ArcSet(tuple(out))

    def subtract(self, other):
        return self.intersect(other.complement())

    def largest_interval(self):
        if self.is_empty:
            raise ValueError("empty arc set has no intervals")
        return max(self.intervals, key=lambda iv: iv[1] - iv[0])

    def midpoints(self):
        """One representative angle per interval."""
        return [0.5 * (lo + hi) for lo, hi in self.intervals]


def arcs_in_halfspaces(frame, constraints):
    """Angles of a framed circle satisfying open half-space constraints.

    Parameters
    ----------
    frame : CircleFrame
        Must carry exactly two axes (a genuine circle).
    constraints : iterable of (vector, offset)
        Each pair ``(v, c)`` demands ``<x, v> > c`` for the circle point
        ``x``.

    Returns
    -------
    ArcSet
        Open angle set in [0, 2*pi]; along the circle each constraint is
        ``R cos(theta - psi) > D`` for constants derived from the frame.
    """
    if frame.axes.shape[0] != 2:
        raise DimensionMismatch("half-space arcs need a two-axis frame")
    arcs = ArcSet.full()
    for v, c in constraints:
        v = np.asarray(v, dtype=float)
        a = frame.radius * float(np.dot(frame.axes[0], v))
        b = frame.radius * float(np.dot(frame.axes[1], v))
        d_off = float(c) - float(np.dot(frame.center, v))
        r = math.hypot(a, b)
        if r <= 1e-15 * (1.0 + abs(d_off)):
            if 0.0 > d_off:
                continue
            return ArcSet()
        t = d_off / r
        if t >= 1.0:
            return ArcSet()
        if t <= -1.0:
            continue
        psi = math.atan2(b, a)
        delta = math.acos(t)
        arcs = arcs.intersect(ArcSet.from_interval(psi - delta, psi + delta))
        if arcs.is_empty:
            return arcs
    return arcs


# --------------------------------------------------------------------------
# angle parametrizations

def sphere_point_2d(k0, theta_deg):
    """Point on the radius-``k0`` circle at ``theta_deg`` degrees from +x."""
    t = math.radians(theta_deg)
    return k0 * np.array([math.cos(t), math.sin(t)])


def sphere_point_3d(k0, theta_deg, phi_deg):
    """Point on the radius-``k0`` sphere at polar ``theta_deg``, azimuth ``phi_deg``."""
    t = math.radians(theta_deg)
    p = math.radians(phi_deg)
    return k0 * np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])


def angles_of_point(x):
    """Inverse of the angle parametrizations, in degrees.

    2D points map to one angle in [0, 360); 3D points map to (polar,
    azimuth) with polar in [0, 180] and azimuth in [0, 360).
    """
    x = np.asarray(x, dtype=float)
    if x.shape == (2,):
        return (math.degrees(math.atan2(x[1], x[0])) % 360.0,)
    if x.shape == (3,):
        n = np.linalg.norm(x)
        if n == 0.0:
            raise InvalidDirection("origin has no spherical angles")
        theta = math.degrees(math.acos(max(-1.0, min(1.0, x[2] / n))))
        phi = math.degrees(math.atan2(x[1], x[0])) % 360.0
        return (theta, phi)
    raise DimensionMismatch("angles are defined for 2D and 3D points only")


def _hemisphere_arc(v):
    """Open half-circle of directions with positive inner product against ``v``."""
    theta = math.atan2(v[1], v[0])
    return ArcSet.from_interval(theta - 0.5 * math.pi, theta + 0.5 * math.pi)


def sigma_arcs(cfg):
    """Angle-space decomposition of the beam hemisphere for dimension 2.

    Returns
    -------
    (ArcSet, ArcSet)
        Arcs of uncoupled and coupled directions. The coupled arcs are the
        beam half-circle intersected with its reflected preimage; the
        uncoupled arcs are the remainder of the beam half-circle.
    """
    if cfg.d != 2:
        raise DimensionMismatch("angle arcs are a 2D decomposition")
    beam = _hemisphere_arc(cfg.omega)
    # H maps angle t to 2*theta_nu + pi - t, so H s on the beam half-circle
    # pins t to another half-circle centered at 2*theta_nu + pi - theta_omega.
    theta_nu = math.atan2(cfg.nu[1], cfg.nu[0])
    theta_omega = math.atan2(cfg.omega[1], cfg.omega[0])
    center = 2.0 * theta_nu + math.pi - theta_omega
    reflected = ArcSet.from_interval(center - 0.5 * math.pi, center + 0.5 * math.pi)
    coupled = beam.intersect(reflected)
    return beam.subtract(coupled), coupled
