"""Local uniqueness analysis for three-dimensional scans.

In 3D a coupled frequency pair (y, z) admits a six-dimensional family of
nearby measurement geometries: shifting the probe by w and sliding delta,
epsilon along the scan normal moves the receiver/incidence pair (eta, sigma)
smoothly. Sampling four parameter combinations produces a 4x4 linear system
for the unknown values at (y+w, y+w+delta nu, z+w, z+w+epsilon nu); whenever
its determinant is nonzero those four values are pinned down by the
measurements. This module solves the implicit geometry (damped Newton),
assembles the local system, searches the parameter ball for a usable
determinant, and carries the closed-form derivative/coefficient formulas
used to cross-check the search analytically.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import (
    DegenerateAnchor,
    DegenerateDirection,
    DimensionMismatch,
    LeftDomain,
    NewtonDiverged,
    OutsideDomain,
    ScanBeamError,
)
from .geometry import (
    SigmaClass,
    classify_sigma,
    hemisphere_contains,
    householder_reflect,
    perp_basis,
    snap_to_sphere,
)

NEWTON_MAX_ITER = 50
NEWTON_TOL_RTOL = 1e-12
#: Newton keeps polishing below the required tolerance while it can; the
#: closed-form derivative cross-checks difference solutions at h = 1e-4 and
#: need the geometry resolved near machine precision.
NEWTON_POLISH_RTOL = 1e-15
NBHD_RADIUS_RTOL = 0.05
DET_TOL = 1e-10
DET_ROUTE_RTOL = 1e-12
#: Coplanarity gate for the coefficient formulas: below this (relative to
#: k0^2) the normalization 1/<nu x eta~, sigma> amplifies roundoff past any
#: useful identity check.
COPLANARITY_RTOL = 1e-6
#: Levels (relative to the per-axis amplitude) probed for delta and epsilon.
#: Zero is pointless there: delta = 0 or epsilon = 0 repeats a geometry and
#: the determinant vanishes identically.
_SLIDE_LEVELS = (-1.0, 0.5, 1.0)


def _require_3d(cfg):
    if cfg.d != 3:
        raise DimensionMismatch("this analysis is specific to three dimensions")


def _triple(a, b, c):
    return float(np.dot(a, np.cross(b, c)))


def _check_independence(cfg, eta, sigma):
    """The anchor triple (eta, sigma, nu) must span; equivalently the scalar
    triple product of sigma with nu x y stays away from zero."""
    y = eta - sigma
    if abs(_triple(sigma, cfg.nu, y)) <= cfg.membership_tol * cfg.k0:
        raise DegenerateAnchor("eta, sigma and the scan normal are linearly dependent")


@dataclasses.dataclass(frozen=True)
class HatSolution:
    """Converged solution (eta_hat, sigma_hat) of the shifted geometry."""

    eta_hat: np.ndarray
    sigma_hat: np.ndarray
    params: tuple
    residual: float
    iterations: int


def newton_hat(cfg, eta, sigma, w, delta=0.0, epsilon=0.0):
    """Solve the shifted measurement geometry around a coupled anchor.

    Finds (eta_hat, sigma_hat) on the sphere with

        eta_hat - sigma_hat        = y + w + delta nu
        2 <sigma_hat, nu>          = 2 <sigma, nu> + epsilon - delta

    which together place the reflected difference at z + w + epsilon nu.
    Solved as a six-equation ambient system (three difference components,
    the normal component, two sphere constraints) by damped Newton from
    (eta, sigma); the ambient formulation keeps the Jacobian free of chart
    choices near the poles.

    Raises
    ------
    NewtonDiverged
        No convergence within the iteration cap, or a singular step.
    LeftDomain
        The converged pair leaves the receiver hemisphere or the coupled
        sector, so no measurement exists there.
    DegenerateAnchor
        The anchor triple (eta, sigma, nu) is linearly dependent.
    """
    _require_3d(cfg)
    eta = snap_to_sphere(cfg, np.asarray(eta, dtype=float))
    sigma = snap_to_sphere(cfg, np.asarray(sigma, dtype=float))
    if not hemisphere_contains(cfg, cfg.e_last, eta):
        raise OutsideDomain("anchor eta must lie on the receiver hemisphere")
    if classify_sigma(cfg, sigma) is not SigmaClass.SIGMA2:
        raise OutsideDomain("anchor sigma must lie in the coupled sector")
    _check_independence(cfg, eta, sigma)

    w = np.asarray(w, dtype=float)
    nu = cfg.nu
    k0sq = cfg.k0 * cfg.k0
    target_diff = (eta - sigma) + w + delta * nu
    target_normal = 2.0 * float(np.dot(sigma, nu)) + epsilon - delta
    tol = NEWTON_TOL_RTOL * cfg.k0

    def residual(eh, sh):
        return np.concatenate(
            [
                eh - sh - target_diff,
                [
                    2.0 * float(np.dot(sh, nu)) - target_normal,
                    float(np.dot(eh, eh)) - k0sq,
                    float(np.dot(sh, sh)) - k0sq,
                ],
            ]
        )

    eh = eta.copy()
    sh = sigma.copy()
    f = residual(eh, sh)
    iterations = 0
    polish = NEWTON_POLISH_RTOL * cfg.k0
    while np.max(np.abs(f)) > polish:
        if iterations >= NEWTON_MAX_ITER:
            if np.max(np.abs(f)) <= tol:
                break
            raise NewtonDiverged(
                f"no convergence in {NEWTON_MAX_ITER} iterations (residual {np.max(np.abs(f)):.3e})"
            )
        jac = np.zeros((6, 6))
        jac[0:3, 0:3] = np.eye(3)
        jac[0:3, 3:6] = -np.eye(3)
        jac[3, 3:6] = 2.0 * nu
        jac[4, 0:3] = 2.0 * eh
        jac[5, 3:6] = 2.0 * sh
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged("singular Jacobian during iteration") from exc
        norm_f = np.max(np.abs(f))
        lam = 1.0
        accepted = False
        while lam >= 2.0**-24:
            eh_try = eh + lam * step[0:3]
            sh_try = sh + lam * step[3:6]
            f_try = residual(eh_try, sh_try)
            if np.max(np.abs(f_try)) <= (1.0 - 0.25 * lam) * norm_f:
                eh, sh, f = eh_try, sh_try, f_try
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            # stalled at the floating-point floor; fine if already converged
            if norm_f <= tol:
                break
            raise NewtonDiverged("damping failed to reduce the residual")
        iterations += 1

    # re-substitution into both lines of the shifted geometry
    z = (eta - sigma) + 2.0 * float(np.dot(sigma, nu)) * nu
    line1 = eh - sh - target_diff
    line2 = eh - householder_reflect(nu, sh) - (z + w + epsilon * nu)
    check = max(np.max(np.abs(line1)), np.max(np.abs(line2)))
    if check > 10.0 * tol:
        raise ScanBeamError(f"converged point fails re-substitution ({check:.3e})")

    if not hemisphere_contains(cfg, cfg.e_last, eh):
        raise LeftDomain("shifted receiver direction left the measured hemisphere")
    if classify_sigma(cfg, snap_to_sphere(cfg, sh)) is not SigmaClass.SIGMA2:
        raise LeftDomain("shifted incidence direction left the coupled sector")
    return HatSolution(
        eta_hat=eh,
        sigma_hat=sh,
        params=(w.copy(), float(delta), float(epsilon)),
        residual=float(np.max(np.abs(f))),
        iterations=iterations,
    )


@dataclasses.dataclass(frozen=True)
class LocalSystem:
    """The 4x4 system tying measurements to values at four shifted points.

    Unknown order: (y+w, y+w+delta nu, z+w, z+w+epsilon nu). ``det`` is the
    cofactor form b2 b3 - b1 b4, cross-checked against the direct 4x4
    determinant at assembly time.
    """

    matrix: np.ndarray
    points: tuple
    det: complex
    hats: tuple
    rhs: np.ndarray | None = None


def local_system(cfg, bc, eta, sigma, w, delta, epsilon, source=None):
    """Assemble the four-measurement system at one parameter triple.

    ``source`` is an optional measurement map ``(eta_hat, sigma_hat) ->
    complex``; when given, the right-hand side is the measured values scaled
    by the density at the reflected incidence.
    """
    _require_3d(cfg)
    w = np.asarray(w, dtype=float)
    hats = (
        newton_hat(cfg, eta, sigma, w, 0.0, 0.0),
        newton_hat(cfg, eta, sigma, w, 0.0, epsilon),
        newton_hat(cfg, eta, sigma, w, delta, 0.0),
        newton_hat(cfg, eta, sigma, w, delta, epsilon),
    )
    b = [bc(h.sigma_hat) for h in hats]
    matrix = np.array(
        [
            [b[0], 0.0, 1.0, 0.0],
            [b[1], 0.0, 0.0, 1.0],
            [0.0, b[2], 1.0, 0.0],
            [0.0, b[3], 0.0, 1.0],
        ],
        dtype=complex,
    )
    det = b[1] * b[2] - b[0] * b[3]
    det_direct = complex(np.linalg.det(matrix))
    scale = max(1.0, float(np.max(np.abs(matrix))) ** 2)
    if abs(det - det_direct) > DET_ROUTE_RTOL * scale:
        raise ScanBeamError(
            f"determinant routes disagree: cofactor {det}, direct {det_direct}"
        )
    eta = snap_to_sphere(cfg, np.asarray(eta, dtype=float))
    sigma = snap_to_sphere(cfg, np.asarray(sigma, dtype=float))
    y = eta - sigma
    z = y + 2.0 * float(np.dot(sigma, cfg.nu)) * cfg.nu
    points = (y + w, y + w + delta * cfg.nu, z + w, z + w + epsilon * cfg.nu)
    rhs = None
    if source is not None:
        rhs = np.array(
            [
                source(h.eta_hat, h.sigma_hat)
                / bc.density(householder_reflect(cfg.nu, h.sigma_hat))
                for h in hats
            ],
            dtype=complex,
        )
    matrix.flags.writeable = False
    return LocalSystem(matrix=matrix, points=points, det=det, hats=hats, rhs=rhs)


@dataclasses.dataclass(frozen=True)
class DetSearchResult:
    found: bool
    w: np.ndarray
    delta: float
    epsilon: float
    det: complex
    abs_det: float
    det_tol: float
    radius: float
    evaluations: int
    system: LocalSystem | None = None


def det_search(cfg, bc, eta, sigma, radius=None, budget=3000):
    """Search the parameter ball for a nonzero local determinant.

    Coarse grid (5 points per shift axis, three nonzero slide levels each
    for delta and epsilon), Newton solutions cached across the slide grid,
    then coordinate-wise golden-section polish of the best cell. The best
    triple is re-assembled through :func:`local_system`, which re-runs the
    determinant cross-check.

    A result with ``found=False`` is evidence of degeneracy, not proof; the
    maximum magnitude seen is reported either way.
    """
    _require_3d(cfg)
    eta = snap_to_sphere(cfg, np.asarray(eta, dtype=float))
    sigma = snap_to_sphere(cfg, np.asarray(sigma, dtype=float))
    _check_independence(cfg, eta, sigma)
    if radius is None:
        radius = NBHD_RADIUS_RTOL * cfg.k0
    amp = radius / math.sqrt(5.0)
    w_axis = np.linspace(-amp, amp, 5)
    slide = tuple(level * amp for level in _SLIDE_LEVELS)

    best = None  # (abs_det, params)
    evaluations = 0
    exhausted = False
    for w1 in w_axis:
        for w2 in w_axis:
            for w3 in w_axis:
                w = np.array([w1, w2, w3])
                try:
                    base = newton_hat(cfg, eta, sigma, w, 0.0, 0.0)
                except (NewtonDiverged, LeftDomain):
                    continue
                b1 = bc(base.sigma_hat)
                b_eps = {}
                for eps in slide:
                    try:
                        b_eps[eps] = bc(newton_hat(cfg, eta, sigma, w, 0.0, eps).sigma_hat)
                    except (NewtonDiverged, LeftDomain):
                        pass
                for delta in slide:
                    try:
                        b3 = bc(newton_hat(cfg, eta, sigma, w, delta, 0.0).sigma_hat)
                    except (NewtonDiverged, LeftDomain):
                        continue
                    for eps in slide:
                        if eps not in b_eps:
                            continue
                        if evaluations >= budget:
                            exhausted = True
                            break
                        try:
                            b4 = bc(newton_hat(cfg, eta, sigma, w, delta, eps).sigma_hat)
                        except (NewtonDiverged, LeftDomain):
                            continue
                        evaluations += 1
                        det = b_eps[eps] * b3 - b1 * b4
                        if best is None or abs(det) > best[0]:
                            best = (abs(det), (w.copy(), delta, eps))
                    if exhausted:
                        break
                if exhausted:
                    break
            if exhausted:
                break
        if exhausted:
            break

    if best is None:
        return DetSearchResult(
            found=False,
            w=np.zeros(3),
            delta=0.0,
            epsilon=0.0,
            det=0.0j,
            abs_det=0.0,
            det_tol=DET_TOL,
            radius=radius,
            evaluations=evaluations,
        )

    def objective(params):
        w, delta, eps = np.array(params[:3]), params[3], params[4]
        try:
            hats = (
                newton_hat(cfg, eta, sigma, w, 0.0, 0.0),
                newton_hat(cfg, eta, sigma, w, 0.0, eps),
                newton_hat(cfg, eta, sigma, w, delta, 0.0),
                newton_hat(cfg, eta, sigma, w, delta, eps),
            )
        except (NewtonDiverged, LeftDomain):
            return -1.0
        b = [bc(h.sigma_hat) for h in hats]
        return abs(b[1] * b[2] - b[0] * b[3])

    golden = (math.sqrt(5.0) - 1.0) / 2.0
    params = list(best[1][0]) + [best[1][1], best[1][2]]
    spacing = [w_axis[1] - w_axis[0]] * 3 + [0.75 * amp] * 2
    for _ in range(2):
        for axis in range(5):
            lo = max(-amp, params[axis] - spacing[axis])
            hi = min(amp, params[axis] + spacing[axis])
            x1 = hi - golden * (hi - lo)
            x2 = lo + golden * (hi - lo)
            f1 = objective(params[:axis] + [x1] + params[axis + 1 :])
            f2 = objective(params[:axis] + [x2] + params[axis + 1 :])
            for _ in range(16):
                if f1 < f2:
                    lo = x1
                    x1, f1 = x2, f2
                    x2 = lo + golden * (hi - lo)
                    f2 = objective(params[:axis] + [x2] + params[axis + 1 :])
                else:
                    hi = x2
                    x2, f2 = x1, f1
                    x1 = hi - golden * (hi - lo)
                    f1 = objective(params[:axis] + [x1] + params[axis + 1 :])
            pick = x1 if f1 >= f2 else x2
            if objective(params[:axis] + [pick] + params[axis + 1 :]) > objective(params):
                params[axis] = pick

    w_best = np.array(params[:3])
    system = local_system(cfg, bc, eta, sigma, w_best, params[3], params[4])
    return DetSearchResult(
        found=abs(system.det) > DET_TOL,
        w=w_best,
        delta=params[3],
        epsilon=params[4],
        det=system.det,
        abs_det=abs(system.det),
        det_tol=DET_TOL,
        radius=radius,
        evaluations=evaluations,
        system=system,
    )


# --------------------------------------------------------------------------
# closed-form derivative and coefficient formulas


@dataclasses.dataclass(frozen=True)
class AppendixCoeffs:
    """Scalar coefficients and dual frame at a direction pair (sigma, eta~).

    ``coords`` are the components of eta~ in the orthogonal frame built from
    sigma, nu x sigma and sigma x (nu x sigma); the dual basis (v1, v2, v3)
    inverts (nu, eta~ - sigma, sigma).
    """

    mu: float
    alpha: float
    beta: float
    gamma: float
    coords: tuple
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray


def appendix_coeffs(cfg, sigma, eta_tilde):
    """Coefficients mu, alpha, beta, gamma of the derivative formulas.

    Raises
    ------
    DegenerateDirection
        When eta~, sigma and nu are (nearly) coplanar, which collapses the
        normalization 1 / <nu x eta~, sigma>.
    """
    _require_3d(cfg)
    sigma = snap_to_sphere(cfg, np.asarray(sigma, dtype=float))
    eta_tilde = snap_to_sphere(cfg, np.asarray(eta_tilde, dtype=float))
    if classify_sigma(cfg, sigma) is not SigmaClass.SIGMA2:
        raise OutsideDomain("sigma must lie in the coupled sector")
    if not hemisphere_contains(cfg, cfg.e_last, eta_tilde):
        raise OutsideDomain("eta~ must lie on the receiver hemisphere")
    nu = cfg.nu
    k0sq = cfg.k0 * cfg.k0
    denom = float(np.dot(np.cross(nu, eta_tilde), sigma))
    gate = COPLANARITY_RTOL * k0sq
    if abs(denom) <= gate:
        raise DegenerateDirection("eta~, sigma and the scan normal are coplanar")
    nxs = np.cross(nu, sigma)
    nrm2 = float(np.dot(nxs, nxs))
    if nrm2 <= gate * gate / k0sq:
        raise DegenerateDirection("sigma is parallel to the scan normal")
    mu = 1.0 / denom

    t1 = float(np.dot(eta_tilde, sigma)) / k0sq
    t2 = float(np.dot(eta_tilde, nxs))
    t3 = float(np.dot(eta_tilde, np.cross(sigma, nxs))) / k0sq

    # identities of the coordinate frame, kept as live assertions
    if abs(denom + t2) > 1e-12 * k0sq:
        raise ScanBeamError("normalization disagrees with -1/t2")
    if abs(float(np.dot(eta_tilde, nu)) - (t1 * float(np.dot(sigma, nu)) + t3)) > 1e-11 * cfg.k0:
        raise ScanBeamError("normal component fails the coordinate identity")
    recon = t1 * sigma + (t2 / nrm2) * nxs + (t3 / nrm2) * np.cross(sigma, nxs)
    if np.max(np.abs(recon - eta_tilde)) > 1e-9 * cfg.k0:
        raise ScanBeamError("orthogonal frame fails to reconstruct eta~")

    sn = float(np.dot(sigma, nu))
    gamma = sn * t1 * t3 - t2 * t2 / (2.0 * nrm2) + (1.0 - k0sq / (2.0 * nrm2)) * t3 * t3
    beta = t2 * t2 - k0sq * (t1 - 1.0) * gamma
    alpha = sn * gamma

    v1 = mu * np.cross(eta_tilde, sigma)
    v2 = -mu * nxs
    v3 = mu * np.cross(nu, eta_tilde - sigma)
    basis = (nu, eta_tilde - sigma, sigma)
    gram = np.array([[float(np.dot(v, b)) for b in basis] for v in (v1, v2, v3)])
    if np.max(np.abs(gram - np.eye(3))) > 1e-9 * max(1.0, abs(mu) * k0sq):
        raise ScanBeamError("dual frame fails its defining relations")

    return AppendixCoeffs(
        mu=mu, alpha=alpha, beta=beta, gamma=gamma, coords=(t1, t2, t3), v1=v1, v2=v2, v3=v3
    )


def sigma_hat_derivatives(cfg, sigma, eta_tilde):
    """Closed-form parameter derivatives of the shifted incidence direction.

    Evaluated at the constant-incidence solution through (eta~, sigma):
    returns (d/d_eps sigma_hat, d/d_delta sigma_hat, tangential part of the
    mixed second derivative).
    """
    co = appendix_coeffs(cfg, sigma, eta_tilde)
    t = np.cross(eta_tilde, sigma)
    n = np.cross(cfg.nu, sigma)
    d_eps = 0.5 * co.mu * t
    # d_delta decomposes over the dual basis as -(1/2) v1 - <eta~,nu> v2 with
    # v2 = -mu n, so the n term carries a plus sign.
    d_delta = -0.5 * co.mu * t + co.mu * float(np.dot(eta_tilde, cfg.nu)) * n
    d_mixed = 0.5 * co.mu**3 * (co.alpha * t + co.beta * n)
    return d_eps, d_delta, d_mixed


def degeneracy_identity(cfg, bc, sigma, eta_tilde):
    """The analytic obstruction to a vanishing local determinant.

    Evaluates, with c = log b,

        -(1/2mu) D2c(t,t) + (<eta~,nu>/mu) D2c(t,n) + alpha Dc(t) + beta Dc(n)

    at t = eta~ x sigma, n = nu x sigma. This equals (2/mu^3) times
    D2c(d_eps, d_delta) + Dc(d_mixed), the quantity forced to vanish by a
    locally singular system. A nonzero value at any nearby eta~ certifies
    that the local determinant is not identically zero around the anchor;
    for constant coupling it vanishes identically.
    """
    co = appendix_coeffs(cfg, sigma, eta_tilde)
    der = bc.derivatives(sigma, order=2)
    t = np.cross(eta_tilde, sigma)
    n = np.cross(cfg.nu, sigma)
    val = (
        -0.5 / co.mu * der.d2c(t, t)
        + float(np.dot(eta_tilde, cfg.nu)) / co.mu * der.d2c(t, n)
        + co.alpha * der.dc(t)
        + co.beta * der.dc(n)
    )
    return complex(val)


def eta_probes(cfg, eta, sigma, count=32, spread=0.15):
    """Receiver directions on a small ring around eta, valid for the
    coefficient formulas (on the hemisphere, away from coplanarity)."""
    _require_3d(cfg)
    eta = snap_to_sphere(cfg, np.asarray(eta, dtype=float))
    sigma = snap_to_sphere(cfg, np.asarray(sigma, dtype=float))
    u, v = perp_basis(eta)
    out = []
    for k in range(count):
        psi = 2.0 * math.pi * (k + 0.5) / count
        direction = math.cos(spread) * eta / cfg.k0 + math.sin(spread) * (
            math.cos(psi) * u + math.sin(psi) * v
        )
        probe = cfg.k0 * direction / np.linalg.norm(direction)
        if not hemisphere_contains(cfg, cfg.e_last, probe):
            continue
        if abs(float(np.dot(np.cross(cfg.nu, probe), sigma))) <= 10.0 * COPLANARITY_RTOL * cfg.k0**2:
            continue
        out.append(probe)
    return out
