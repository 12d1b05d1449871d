"""Level-sphere uniqueness mechanism for dimensions four and up.

From dimension 4 on, the coupled representations of a frequency pair (y, z)
with a fixed scan-normal coordinate lam form a sphere of dimension d - 3
rather than a finite point set. Whenever the coupling ratio b takes two
different values on that sphere, the two equations

    b(sigma)  g(y) + g(z) = r1
    b(sigma^) g(y) + g(z) = r2

have a nonsingular 2x2 matrix and pin both unknowns down; with homogeneous
data this forces g(y) = g(z) = 0. This module parametrizes the level sphere,
probes it for a discriminating pair, and solves the resulting system.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .coupling_sets import lambda_interval
from .errors import (
    DegenerateAnchor,
    DimensionMismatch,
    EmptyCouplingSet,
    SingularPair,
)
from .geometry import householder_reflect

#: Minimum coupling-value gap for a pair to count as discriminating.
PAIR_TOL = 1e-8
#: Probes thrown at the level sphere when hunting for a pair.
PROBE_COUNT = 256
#: Probes used only to decide whether the open conditions leave anything.
EMPTY_CHECK_PROBES = 64
#: Interior scan-normal levels tried per base point.
LEVEL_COUNT = 8
#: Relative rank floor for the span checks.
RANK_RTOL = 1e-10
#: Fixed generator seed for the dimension-6 probe set.
_PROBE_SEED = 20240405


def _require_highdim(cfg):
    if cfg.d < 4:
        raise DimensionMismatch("the level-sphere machinery starts at dimension 4")


@dataclasses.dataclass(frozen=True)
class CSphere:
    """The coupled level set at one scan-normal coordinate.

    The set lives on the sphere ``{center + radius * frame.T @ v : |v| = 1}``
    where ``frame`` holds ``d - 2`` orthonormal rows spanning the affine
    subspace cut out by the two sphere equations and the level plane. Each
    open condition becomes a cap in the unit coordinates ``v``: a point is
    admissible when ``coeffs . v > threshold`` for every ``(coeffs,
    threshold)`` in ``caps`` (thresholds already include the strict-margin
    tolerance).
    """

    center: np.ndarray
    radius: float
    frame: np.ndarray
    caps: tuple
    y: np.ndarray
    lam: float

    def point(self, v):
        """Ambient point at unit coordinates ``v`` (length d - 2)."""
        v = np.asarray(v, dtype=float)
        return self.center + self.radius * (self.frame.T @ v)

    def admissible(self, v):
        """Whether the point at ``v`` satisfies every open condition."""
        v = np.asarray(v, dtype=float)
        return all(float(np.dot(coeffs, v)) > threshold for coeffs, threshold in self.caps)


def unit_probes(m, count):
    """``count`` deterministic unit vectors in dimension ``m`` (2, 3 or 4).

    Dimension 2 uses evenly spaced angles, dimension 3 a Fibonacci point set,
    dimension 4 a fixed-seed Gaussian draw; each is reproducible across runs.
    """
    if m == 2:
        angles = 2.0 * math.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if m == 3:
        k = np.arange(count)
        z = 1.0 - 2.0 * (k + 0.5) / count
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = 2.0 * math.pi * k * (math.sqrt(5.0) - 1.0) / 2.0
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    if m == 4:
        rng = np.random.default_rng(_PROBE_SEED)
        raw = rng.standard_normal((count, 4))
        return raw / np.linalg.norm(raw, axis=1, keepdims=True)
    raise DimensionMismatch(f"no probe set for sphere coordinates of dimension {m}")


def _open_conditions(cfg, y):
    """The three open half-space conditions <sigma, w> > c defining which
    part of the level sphere is actually coupled: sigma on the beam
    hemisphere, its reflection too, and sigma + y on the receiver side."""
    return [
        (cfg.omega, 0.0),
        (householder_reflect(cfg.nu, cfg.omega), 0.0),
        (cfg.e_last, -float(np.dot(y, cfg.e_last))),
    ]


def c_sphere(cfg, y, lam, check_probes=EMPTY_CHECK_PROBES):
    """Parametrize the coupled level set at scan-normal coordinate ``lam``.

    Solves the affine subspace from ``|sigma| = k0``, ``|sigma + y| = k0``
    and ``<sigma, nu> = lam``; the first two reduce to the hyperplane
    ``<sigma, y> = -|y|^2 / 2``. Returns ``None`` when the set is empty:
    the squared radius is nonpositive, a single open condition excludes the
    whole sphere, or none of ``check_probes`` probe points is admissible.
    Base points on the scan-normal line (including zero) are also reported
    empty, since the level set degenerates there and the two-point mechanism
    needs the generic sphere.
    """
    _require_highdim(cfg)
    y = np.asarray(y, dtype=float)
    if y.shape != (cfg.d,):
        raise DimensionMismatch(f"expected a point of shape ({cfg.d},), got {y.shape}")
    lam = float(lam)

    matrix = np.vstack([y, cfg.nu])
    gram = matrix @ matrix.T
    # det(gram) = |y|^2 - <y, nu>^2 is the squared distance of y from the
    # scan-normal line; below the floor the two planes are parallel.
    if float(np.linalg.det(gram)) <= (RANK_RTOL * cfg.k0) ** 2:
        return None
    rhs = np.array([-0.5 * float(np.dot(y, y)), lam])
    center = matrix.T @ np.linalg.solve(gram, rhs)
    r2 = cfg.k0**2 - float(np.dot(center, center))
    if r2 <= 0.0:
        return None
    radius = math.sqrt(r2)
    frame = np.linalg.svd(matrix)[2][2:]

    caps = []
    for w, c in _open_conditions(cfg, y):
        coeffs = frame @ w
        threshold = (c + cfg.membership_tol - float(np.dot(center, w))) / radius
        if np.linalg.norm(coeffs) <= threshold:
            return None  # this condition alone excludes the whole sphere
        caps.append((coeffs, threshold))
    sphere = CSphere(
        center=center, radius=radius, frame=frame, caps=tuple(caps), y=y, lam=lam
    )
    if not any(sphere.admissible(v) for v in unit_probes(cfg.d - 2, check_probes)):
        return None
    return sphere


def probe_points(sphere, count=PROBE_COUNT):
    """Admissible ambient points from the deterministic probe set."""
    dim = sphere.frame.shape[0]
    return [sphere.point(v) for v in unit_probes(dim, count) if sphere.admissible(v)]


@dataclasses.dataclass(frozen=True)
class PairResult:
    """Outcome of the discriminating-pair search on one level sphere.

    ``found`` is False when the sphere is empty or every probed pair of
    coupling values lies within ``pair_tol``; the best gap seen is reported
    either way.
    """

    found: bool
    lam: float
    gap: float
    pair_tol: float
    admissible: int
    sigma: np.ndarray | None = None
    sigma_hat: np.ndarray | None = None


def find_discriminating_pair(cfg, bc, y, lam, probes=PROBE_COUNT, pair_tol=PAIR_TOL):
    """Search the level sphere for two directions with different coupling.

    Evaluates ``bc`` on every admissible probe point and returns the pair
    maximizing ``|b(sigma) - b(sigma^)|``; the pair counts as found when the
    gap exceeds ``pair_tol``.
    """
    sphere = c_sphere(cfg, np.asarray(y, dtype=float), lam)
    if sphere is None:
        return PairResult(found=False, lam=float(lam), gap=0.0, pair_tol=pair_tol, admissible=0)
    points = probe_points(sphere, probes)
    if len(points) < 2:
        return PairResult(
            found=False, lam=float(lam), gap=0.0, pair_tol=pair_tol, admissible=len(points)
        )
    values = np.array([bc(p) for p in points])
    gaps = np.abs(values[:, None] - values[None, :])
    i, j = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
    gap = float(gaps[i, j])
    return PairResult(
        found=gap > pair_tol,
        lam=float(lam),
        gap=gap,
        pair_tol=pair_tol,
        admissible=len(points),
        sigma=points[i],
        sigma_hat=points[j],
    )


def level_probes(cfg, y, count=LEVEL_COUNT):
    """Chebyshev-spaced interior scan-normal levels for the base point ``y``.

    The levels sample the open interior of the coordinate range, never its
    endpoints (where the level sphere collapses).
    """
    interval = lambda_interval(cfg, y)
    if interval is None:
        raise EmptyCouplingSet("the base point has no sphere-pair representations")
    lo, hi = interval
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = [mid + half * math.cos(math.pi * (2 * j + 1) / (2 * count)) for j in range(count)]
    return tuple(sorted(nodes))


def level_scan(cfg, bc, y, levels=LEVEL_COUNT, probes=PROBE_COUNT, pair_tol=PAIR_TOL):
    """Try every probed level and keep the best discriminating pair.

    Returns the first result ranked by (found, gap); when no level yields a
    pair the largest-gap failure comes back so diagnostics can report how
    close the scan got.
    """
    _require_highdim(cfg)
    best = None
    for lam in level_probes(cfg, y):
        result = find_discriminating_pair(cfg, bc, y, lam, probes=probes, pair_tol=pair_tol)
        if best is None or (result.found, result.gap) > (best.found, best.gap):
            best = result
    return best


def solve_pair(bc, sigma, sigma_hat, rhs, pair_tol=PAIR_TOL):
    """Solve the 2x2 system of a discriminating pair for (g(y), g(z)).

    The matrix rows are (b(sigma), 1) and (b(sigma^), 1), so the determinant
    is the coupling gap itself; a gap at or below ``pair_tol`` raises
    :class:`SingularPair`. A homogeneous right-hand side yields exact zeros.
    """
    b1 = complex(bc(sigma))
    b2 = complex(bc(sigma_hat))
    det = b1 - b2
    if abs(det) <= pair_tol:
        raise SingularPair(f"coupling gap {abs(det):.3e} is within {pair_tol:g}")
    r1, r2 = complex(rhs[0]), complex(rhs[1])
    g_y = (r1 - r2) / det
    g_z = (b1 * r2 - b2 * r1) / det
    return g_y, g_z


def tangent_basis(cfg, y, sigma):
    """Orthonormal basis of the level-set tangent space at ``sigma``.

    The tangent space is the orthogonal complement of span{y, sigma, nu};
    a rank-deficient span (base point, direction and scan normal dependent)
    raises :class:`DegenerateAnchor`.
    """
    _require_highdim(cfg)
    rows = np.vstack([np.asarray(y, dtype=float), np.asarray(sigma, dtype=float), cfg.nu])
    _, svals, vh = np.linalg.svd(rows)
    if svals[2] <= RANK_RTOL * svals[0]:
        raise DegenerateAnchor("base point, direction and scan normal do not span")
    return vh[3:]
