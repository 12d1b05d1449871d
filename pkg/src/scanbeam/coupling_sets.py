"""Coupled frequency sets and region membership.

A measured frequency ``y`` can enter the data directly (through an uncoupled
incident direction), coupled to one partner frequency, or both. Which of
these happens is decided entirely by the geometry of the sphere pair ``{|s| =
k0} ∩ {|s + y| = k0}`` against three open half-spaces. This module computes
the coupled partner set of a point, classifies points into recoverability
regions, and rasterizes the classification into region maps.

Partner sets are described per dimension: in the plane they are at most two
points; in three dimensions they form intervals in the scan-normal coordinate
``lambda = <sigma, nu>``; from dimension four on the level sets are spheres
handled by the high-dimensional module.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, DimensionMismatch, InvalidSlice, OutsideDomain
from .geometry import (
    TWO_PI,
    WHOLE_SPHERE,
    ArcSet,
    SigmaClass,
    arcs_in_halfspaces,
    classify_sigma,
    hemisphere_contains,
    householder_reflect,
    sigma_arcs,
    sphere_pair_intersection,
    sphere_pair_points,
    unit,
)

#: Arc measure below which a representation set counts as empty.
ARC_MEASURE_FLOOR = 1e-9

#: Probe count for the gradient rule on coupled cells.
GRADIENT_PROBES = 32


class CouplingKind(enum.Enum):
    EMPTY = "empty"
    POINTS = "points"
    LAMBDA_INTERVALS = "lambda_intervals"
    DEGENERATE_INTERVAL = "degenerate_interval"


@dataclasses.dataclass(frozen=True)
class CouplingSet:
    """Partner frequencies coupled to a base point.

    ``points`` carries explicit partners (always in 2D, and at exact
    tangency in 3D). ``lambdas`` carries open intervals of the scan-normal
    coordinate; a partner with coordinate ``lam`` sits at ``base + 2 * lam *
    nu``. The degenerate kind marks base points (the origin, or points on
    the scan-normal line) whose partner set collapses or fills a sphere.
    """

    base: np.ndarray
    kind: CouplingKind
    points: tuple = ()
    lambdas: tuple = ()
    frame: object = None
    arcs: ArcSet | None = None

    @property
    def is_empty(self):
        return self.kind is CouplingKind.EMPTY


def lambda_interval(cfg, y):
    """Range of the scan-normal coordinate over the sphere pair of ``y``.

    Returns the closed interval ``[<c, nu> - r |proj|, <c, nu> + r |proj|]``
    where ``c`` and ``r`` are the center and radius of the sphere pair and
    ``proj`` is the scan normal minus its component along ``y``; ``None``
    when the sphere pair is empty. Exact tangency gives a single-point
    interval, and the zero shift gives the full ``[-k0, k0]``.
    """
    frame = sphere_pair_intersection(cfg, y)
    if frame is None:
        return None
    if frame is WHOLE_SPHERE:
        return (-cfg.k0, cfg.k0)
    y_hat = unit(y)
    proj = cfg.nu - float(np.dot(cfg.nu, y_hat)) * y_hat
    half = frame.radius * float(np.linalg.norm(proj))
    centre = float(np.dot(frame.center, cfg.nu))
    return (centre - half, centre + half)


def _pair_constraints(cfg, y):
    """Open half-space constraints carving the coupled representations out
    of the sphere pair: sigma on the beam hemisphere, its reflection too,
    and sigma + y on the receiver hemisphere."""
    return [
        (cfg.omega, 0.0),
        (cfg.h_omega, 0.0),
        (cfg.e_last, -float(np.dot(y, cfg.e_last))),
    ]


def sphere_pair_representations(cfg, y):
    """All representations ``y = eta - sigma`` in dimension 2.

    Returns ``(eta, sigma, class)`` triples for each sphere-pair candidate
    whose ``eta`` lands on the receiver half-circle; ``class`` tells whether
    ``sigma`` is uncoupled, coupled, or off the beam.
    """
    if cfg.d != 2:
        raise DimensionMismatch("explicit representation lists are a 2D operation")
    reps = []
    for p in sphere_pair_points(cfg, y):
        eta = p + y
        if not hemisphere_contains(cfg, cfg.e_last, eta):
            continue
        reps.append((eta, p, classify_sigma(cfg, p)))
    return reps


def _lambda_intervals_from_arcs(cfg, frame, arcs):
    """Map angle arcs on a framed circle to intervals of ``<sigma, nu>``.

    Along the circle the coordinate is ``c + R cos(theta - psi)``; arcs are
    split at the interior extrema so each monotone piece maps to one
    interval, then overlapping images merge.
    """
    a = frame.radius * float(np.dot(frame.axes[0], cfg.nu))
    b = frame.radius * float(np.dot(frame.axes[1], cfg.nu))
    r = math.hypot(a, b)
    centre = float(np.dot(frame.center, cfg.nu))
    if r <= 1e-15 * (1.0 + abs(centre)):
        return None  # coordinate constant along the circle
    psi = math.atan2(b, a)

    def lam(theta):
        return centre + r * math.cos(theta - psi)

    pieces = []
    for lo, hi in arcs.intervals:
        cuts = [lo, hi]
        for k in range(-2, 3):
            for crit in (psi + k * TWO_PI, psi + math.pi + k * TWO_PI):
                if lo < crit < hi:
                    cuts.append(crit)
        cuts.sort()
        for t0, t1 in zip(cuts, cuts[1:]):
            v0, v1 = lam(t0), lam(t1)
            if abs(v1 - v0) > 0.0:
                pieces.append((min(v0, v1), max(v0, v1)))
    pieces.sort()
    merged = []
    gap = 1e-12 * cfg.k0
    for lo, hi in pieces:
        if merged and lo <= merged[-1][1] + gap:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return tuple(merged)


def coupling_set(cfg, y):
    """Partner frequencies coupled to ``y`` through one reflection.

    Every coupled representation ``y = eta - sigma`` contributes the partner
    ``eta - H sigma = y + 2 <sigma, nu> nu``; the partner set lives on the
    line through ``y`` in the scan-normal direction.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (cfg.d,):
        raise DimensionMismatch(f"expected a point of shape ({cfg.d},), got {y.shape}")
    if np.linalg.norm(y) <= cfg.membership_tol:
        return CouplingSet(base=y, kind=CouplingKind.DEGENERATE_INTERVAL)
    if cfg.d == 2:
        partners = []
        for eta, sigma, cls in sphere_pair_representations(cfg, y):
            if cls is SigmaClass.SIGMA2:
                partners.append(y + 2.0 * float(np.dot(sigma, cfg.nu)) * cfg.nu)
        dedup = []
        for z in partners:
            if not any(np.linalg.norm(z - w) <= 1e-9 * cfg.k0 for w in dedup):
                dedup.append(z)
        if not dedup:
            return CouplingSet(base=y, kind=CouplingKind.EMPTY)
        return CouplingSet(base=y, kind=CouplingKind.POINTS, points=tuple(dedup))
    if cfg.d == 3:
        frame = sphere_pair_intersection(cfg, y)
        if frame is None:
            return CouplingSet(base=y, kind=CouplingKind.EMPTY)
        if frame.radius <= cfg.snap_tol:
            # tangency: the single candidate -y/2
            sigma = frame.center
            ok = all(float(np.dot(sigma, v)) > c + cfg.membership_tol for v, c in _pair_constraints(cfg, y))
            if not ok:
                return CouplingSet(base=y, kind=CouplingKind.EMPTY)
            z = y + 2.0 * float(np.dot(sigma, cfg.nu)) * cfg.nu
            return CouplingSet(base=y, kind=CouplingKind.POINTS, points=(z,), frame=frame)
        arcs = arcs_in_halfspaces(frame, _pair_constraints(cfg, y))
        if arcs.measure <= ARC_MEASURE_FLOOR:
            return CouplingSet(base=y, kind=CouplingKind.EMPTY, frame=frame, arcs=arcs)
        lambdas = _lambda_intervals_from_arcs(cfg, frame, arcs)
        if lambdas is None:
            # scan-normal coordinate constant along the circle (y parallel
            # to nu): the partner set collapses to one degenerate shift
            centre = float(np.dot(frame.center, cfg.nu))
            return CouplingSet(
                base=y,
                kind=CouplingKind.DEGENERATE_INTERVAL,
                lambdas=((centre, centre),),
                frame=frame,
                arcs=arcs,
            )
        return CouplingSet(base=y, kind=CouplingKind.LAMBDA_INTERVALS, lambdas=lambdas, frame=frame, arcs=arcs)
    raise DimensionMismatch("explicit partner sets stop at dimension 3; use the level-sphere machinery")


def c_set(cfg, y, lam):
    """Coupled representations of ``y`` with scan-normal coordinate ``lam``.

    Returns the finite list of directions in dimensions 2 and 3. From
    dimension 4 the level set is a sphere of dimension ``d - 3`` and the
    high-dimensional module's frame object is returned instead.
    """
    y = np.asarray(y, dtype=float)
    tolk = cfg.membership_tol
    if cfg.d == 2:
        out = []
        for eta, sigma, cls in sphere_pair_representations(cfg, y):
            if cls is SigmaClass.SIGMA2 and abs(float(np.dot(sigma, cfg.nu)) - lam) <= tolk:
                out.append(sigma)
        return out
    if cfg.d == 3:
        frame = sphere_pair_intersection(cfg, y)
        if frame is None or frame is WHOLE_SPHERE:
            return []
        if frame.radius <= cfg.snap_tol:
            sigma = frame.center
            if abs(float(np.dot(sigma, cfg.nu)) - lam) > tolk:
                return []
            ok = all(float(np.dot(sigma, v)) > c + tolk for v, c in _pair_constraints(cfg, y))
            return [sigma] if ok else []
        a = frame.radius * float(np.dot(frame.axes[0], cfg.nu))
        b = frame.radius * float(np.dot(frame.axes[1], cfg.nu))
        r = math.hypot(a, b)
        centre = float(np.dot(frame.center, cfg.nu))
        if r <= 1e-15 * (1.0 + abs(centre)):
            return []
        t = (lam - centre) / r
        if abs(t) > 1.0:
            return []
        psi = math.atan2(b, a)
        delta = math.acos(max(-1.0, min(1.0, t)))
        thetas = [psi + delta] if delta in (0.0, math.pi) else [psi - delta, psi + delta]
        out = []
        for theta in thetas:
            sigma = frame.point(theta)
            if all(float(np.dot(sigma, v)) > c + tolk for v, c in _pair_constraints(cfg, y)):
                if not any(np.linalg.norm(sigma - s) <= 1e-9 * cfg.k0 for s in out):
                    out.append(sigma)
        return out
    from . import highdim

    return highdim.c_sphere(cfg, y, lam)


# --------------------------------------------------------------------------
# membership flags


@dataclasses.dataclass(frozen=True)
class MembershipFlags:
    """Which structural sets a frequency point belongs to.

    ``in_y1``: has an uncoupled representation (directly recoverable).
    ``in_y2``: has a coupled representation.
    ``in_tilde_y``: 2D only; reachable in one coupling step from a directly
    recoverable point (hence recoverable too).
    ``nondegenerate``: off the excluded measure-zero sets.
    """

    in_y1: bool
    in_y2: bool
    in_tilde_y: bool
    nondegenerate: bool


def _open_cap_nonempty(cfg, normals):
    """Whether a finite intersection of open hemispheres is nonempty."""
    s = np.sum(normals, axis=0)
    n = np.linalg.norm(s)
    if n > 1e-12:
        s = s / n
        if all(float(np.dot(s, v)) > 1e-9 for v in normals):
            return True
    rng = np.random.default_rng(7)
    for v in rng.normal(size=(1000, cfg.d)):
        v = v / np.linalg.norm(v)
        if all(float(np.dot(v, w)) > 1e-9 for w in normals):
            return True
    return False


def _flags_origin(cfg):
    """Flags for the origin: 0 = eta - sigma needs eta = sigma, so the
    question is only whether each sector meets the receiver hemisphere."""
    if cfg.d == 2:
        uncoupled, coupled = sigma_arcs(cfg)
        theta_e = math.atan2(cfg.e_last[1], cfg.e_last[0])
        upper = ArcSet.from_interval(theta_e - 0.5 * math.pi, theta_e + 0.5 * math.pi)
        in_y1 = uncoupled.intersect(upper).measure > ARC_MEASURE_FLOOR
        in_y2 = coupled.intersect(upper).measure > ARC_MEASURE_FLOOR
    else:
        in_y2 = _open_cap_nonempty(cfg, [cfg.omega, cfg.h_omega, cfg.e_last])
        # an uncoupled representation needs the beam cap minus the coupled
        # sector; probe for a point with the reflection outside the beam
        rng = np.random.default_rng(11)
        in_y1 = False
        for v in rng.normal(size=(2000, cfg.d)):
            v = cfg.k0 * v / np.linalg.norm(v)
            if (
                float(np.dot(v, cfg.omega)) > 1e-9
                and float(np.dot(v, cfg.e_last)) > 1e-9
                and float(np.dot(v, cfg.h_omega)) < -1e-9
            ):
                in_y1 = True
                break
    return MembershipFlags(in_y1=in_y1, in_y2=in_y2, in_tilde_y=False, nondegenerate=False)


def membership_flags(cfg, y):
    """Classify a frequency point against the structural sets."""
    y = np.asarray(y, dtype=float)
    if y.shape != (cfg.d,):
        raise DimensionMismatch(f"expected a point of shape ({cfg.d},), got {y.shape}")
    tolk = cfg.membership_tol
    ny = float(np.linalg.norm(y))
    if ny <= tolk:
        return _flags_origin(cfg)

    if cfg.d == 2:
        reps = sphere_pair_representations(cfg, y)
        in_y1 = any(cls is SigmaClass.SIGMA1 for _, _, cls in reps)
        in_y2 = any(cls is SigmaClass.SIGMA2 for _, _, cls in reps)
        in_tilde = False
        for p in sphere_pair_points(cfg, y):
            # read the candidate as a reflected direction: y = eta - H sigma
            eta = p + y
            if not hemisphere_contains(cfg, cfg.e_last, eta):
                continue
            sigma = householder_reflect(cfg.nu, p)
            minus_eta_cls = classify_sigma(cfg, -eta)
            sigma_cls = classify_sigma(cfg, sigma)
            if (
                minus_eta_cls is SigmaClass.SIGMA1
                and sigma_cls is SigmaClass.SIGMA2
                and sigma[1] < -tolk
                and not p[1] < -tolk
            ):
                in_tilde = True
        nondeg = (
            2.0 * cfg.k0 - ny > tolk
            and abs(float(np.dot(y, cfg.nu))) > tolk
            and float(np.linalg.norm(y - float(np.dot(y, cfg.nu)) * cfg.nu)) > tolk
        )
        if nondeg:
            for eta, sigma, cls in reps:
                if cls is SigmaClass.SIGMA2:
                    if abs(float(np.dot(eta, cfg.nu))) <= tolk or abs(float(np.dot(sigma, cfg.nu))) <= tolk:
                        nondeg = False
        return MembershipFlags(in_y1=in_y1, in_y2=in_y2, in_tilde_y=in_tilde, nondegenerate=nondeg)

    if cfg.d == 3:
        cs = coupling_set(cfg, y)
        in_y2 = cs.kind in (CouplingKind.POINTS, CouplingKind.LAMBDA_INTERVALS, CouplingKind.DEGENERATE_INTERVAL)
        in_y1 = False
        frame = cs.frame if cs.frame is not None else sphere_pair_intersection(cfg, y)
        if frame is not None and frame is not WHOLE_SPHERE and frame.radius > cfg.snap_tol:
            beam_arcs = arcs_in_halfspaces(
                frame, [(cfg.omega, 0.0), (cfg.e_last, -float(np.dot(y, cfg.e_last)))]
            )
            coupled_arcs = cs.arcs if cs.arcs is not None else arcs_in_halfspaces(frame, _pair_constraints(cfg, y))
            in_y1 = beam_arcs.subtract(coupled_arcs).measure > ARC_MEASURE_FLOOR
        elif frame is not None and frame is not WHOLE_SPHERE:
            sigma = frame.center
            in_y1 = (
                float(np.dot(sigma, cfg.omega)) > tolk
                and float(np.dot(sigma + y, cfg.e_last)) > tolk
                and not float(np.dot(sigma, cfg.h_omega)) > tolk
            )
        nondeg = (
            2.0 * cfg.k0 - ny > tolk
            and abs(float(np.dot(y, cfg.nu))) > tolk
            and float(np.linalg.norm(y - float(np.dot(y, cfg.nu)) * cfg.nu)) > tolk
        )
        return MembershipFlags(in_y1=in_y1, in_y2=in_y2, in_tilde_y=False, nondegenerate=nondeg)

    raise DimensionMismatch("membership flags stop at dimension 3; use the level-sphere machinery")


# --------------------------------------------------------------------------
# region maps


class RegionLabel(enum.IntEnum):
    """Per-cell recoverability classes; the integer values are the stable
    serialization contract for region CSV and PGM artifacts."""

    OUTSIDE = 0
    DIRECT_ONLY = 1
    DIRECT_AND_COUPLED = 2
    COUPLED_RECOVERABLE = 3
    NON_UNIQUE = 4
    DEGENERATE = 5


@dataclasses.dataclass(frozen=True)
class SliceSpec:
    """Planar slice through a higher-dimensional frequency space."""

    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float)
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if not (origin.shape == u.shape == v.shape):
            raise InvalidSlice("slice origin and axes must share one shape")
        if abs(np.dot(u, u) - 1.0) > 1e-10 or abs(np.dot(v, v) - 1.0) > 1e-10 or abs(np.dot(u, v)) > 1e-10:
            raise InvalidSlice("slice axes must be orthonormal")
        for name, val in (("origin", origin), ("u", u), ("v", v)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    def point(self, x, yy):
        return self.origin + x * self.u + yy * self.v


def default_slice(cfg):
    """Slice through the origin spanned by the beam axis and the part of the
    scan normal orthogonal to it (falls back to coordinate axes)."""
    u = cfg.omega
    rest = cfg.nu - float(np.dot(cfg.nu, u)) * u
    n = np.linalg.norm(rest)
    if n > 1e-9:
        v = rest / n
    else:
        basis = np.eye(cfg.d)
        v = next(b for b in basis if abs(np.dot(b, u)) < 0.9)
        v = v - float(np.dot(v, u)) * u
        v = v / np.linalg.norm(v)
    return SliceSpec(origin=np.zeros(cfg.d), u=u, v=v)


def _gradient_probe_passes(cfg, bc, cs):
    """Gradient rule on a coupled cell: sample representations along the
    constraint arcs and require the non-degeneracy test at each."""
    if bc is None:
        raise ConfigError("the gradient rule needs a coupling coefficient")
    if cs.frame is None or cs.arcs is None or cs.arcs.is_empty:
        return False
    total = cs.arcs.measure
    checked = 0
    for lo, hi in cs.arcs.intervals:
        count = max(1, int(round(GRADIENT_PROBES * (hi - lo) / total)))
        inset = 1e-6 * (hi - lo)
        for theta in np.linspace(lo + inset, hi - inset, count):
            sigma = cs.frame.point(theta)
            try:
                passed = bool(bc.gradient_condition(sigma))
            except OutsideDomain:
                # razor-thin arcs can push a probe over the strict boundary
                continue
            if not passed:
                return False
            checked += 1
    return checked > 0


def label_point(cfg, y, bc=None, rule="auto"):
    """Recoverability label of one frequency point.

    ``rule`` selects how coupled-only points are judged: ``"graph2d"`` uses
    the planar component classification (the anchored one-step set is
    recoverable, the rest is not), ``"gradient"`` uses the derivative test
    on probed representations (recoverable when it passes everywhere,
    degenerate otherwise), and ``"auto"`` picks by dimension.
    """
    if rule not in ("auto", "graph2d", "gradient"):
        raise ConfigError(f"unknown uniqueness rule {rule!r}")
    if rule == "auto":
        rule = "graph2d" if cfg.d == 2 else "gradient"
    flags = membership_flags(cfg, y)
    if not (flags.in_y1 or flags.in_y2):
        return RegionLabel.OUTSIDE
    if flags.in_y1 and flags.in_y2:
        return RegionLabel.DIRECT_AND_COUPLED
    if flags.in_y1:
        return RegionLabel.DIRECT_ONLY
    if not flags.nondegenerate:
        return RegionLabel.DEGENERATE
    if rule == "graph2d":
        if cfg.d != 2:
            raise ConfigError("the planar component rule applies to dimension 2 only")
        return RegionLabel.COUPLED_RECOVERABLE if flags.in_tilde_y else RegionLabel.NON_UNIQUE
    cs = coupling_set(cfg, y)
    if cs.kind is CouplingKind.POINTS and cfg.d == 3:
        # tangency point: fall back to probing the single representation
        sigmas = c_set(cfg, y, float(np.dot(-0.5 * np.asarray(y), cfg.nu)))
        ok = bool(sigmas) and all(bc.gradient_condition(s) for s in sigmas)
        return RegionLabel.COUPLED_RECOVERABLE if ok else RegionLabel.DEGENERATE
    if _gradient_probe_passes(cfg, bc, cs):
        return RegionLabel.COUPLED_RECOVERABLE
    return RegionLabel.DEGENERATE


@dataclasses.dataclass(frozen=True)
class RegionMap:
    """Rasterized recoverability classification over a square window.

    Cells cover ``[-2 k0, 2 k0]^2``; ``labels[iy, ix]`` is the class at the
    center of cell ``(ix, iy)``. For ambient dimension 3 the window lives on
    the stored slice.
    """

    n: int
    k0: float
    centers: np.ndarray
    labels: np.ndarray
    slice_spec: SliceSpec | None = None
    rule: str = "auto"


def region_map(cfg, n, bc=None, slice_spec=None, rule="auto", threads=1):
    """Rasterize :func:`label_point` over the standard window.

    The cell centers are ``-2 k0 + (i + 1/2) * (4 k0 / n)``; every cell with
    center norm beyond ``2 k0`` comes out ``OUTSIDE``. The computation is
    embarrassingly parallel over rows and the result is independent of
    ``threads``.
    """
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"grid size must be a positive integer, got {n!r}")
    if cfg.d >= 3 and slice_spec is None:
        slice_spec = default_slice(cfg)
    if cfg.d == 2 and slice_spec is not None:
        raise ConfigError("slices apply to ambient dimension 3 and above")
    step = 4.0 * cfg.k0 / n
    centers = -2.0 * cfg.k0 + (np.arange(n) + 0.5) * step

    def do_row(iy):
        row = np.empty(n, dtype=np.int8)
        for ix in range(n):
            if cfg.d == 2:
                y = np.array([centers[ix], centers[iy]])
            else:
                y = slice_spec.point(centers[ix], centers[iy])
            row[ix] = int(label_point(cfg, y, bc=bc, rule=rule))
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(do_row, range(n)))
    else:
        rows = [do_row(iy) for iy in range(n)]
    labels = np.vstack(rows)
    labels.flags.writeable = False
    centers.flags.writeable = False
    return RegionMap(n=n, k0=cfg.k0, centers=centers, labels=labels, slice_spec=slice_spec, rule=rule)
