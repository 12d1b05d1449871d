"""Beam densities and the coupling ratio they induce.

A scan's beam is described by a density on the hemisphere facing the beam
axis. Wherever a direction and its reflection both carry beam energy, the
two corresponding Fourier samples enter every measurement together; the
ratio of the density at the direction to the density at its reflection is
the coupling coefficient that weights the pair. This module provides two
density families (a rotationally symmetric Gaussian profile and a tabulated
profile interpolated from samples), the coupling ratio extended radially to
a shell, its first and second derivatives, and the derivative-based
non-degeneracy test used by the higher-dimensional uniqueness machinery.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import ConfigError, DimensionMismatch, OutsideDomain
from .geometry import (
    SigmaClass,
    classify_sigma,
    householder_reflect,
    snap_to_sphere,
)

#: Finite-difference step (relative to k0) for tabulated-density derivatives.
FD_STEP_RTOL = 1e-5

#: Default threshold for the gradient non-degeneracy test.
DEFAULT_COND_TOL = 1e-8


class GaussianDensity:
    """Rotationally symmetric profile ``exp(-decay * |s_perp|^2)`` on the beam
    hemisphere, zero elsewhere.

    ``|s_perp|^2 = k0^2 - <s, omega>^2`` is the squared distance from the
    beam axis. ``decay = 0`` gives the constant profile, the canonical
    degenerate case in which every coupling ratio equals one.
    """

    kind = "gaussian"

    def __init__(self, cfg, decay=1.0):
        if decay < 0.0:
            raise ConfigError(f"decay must be nonnegative, got {decay!r}")
        self.cfg = cfg
        self.decay = float(decay)

    def __call__(self, s):
        cfg = self.cfg
        s = snap_to_sphere(cfg, s)
        axial = float(np.dot(s, cfg.omega))
        if axial <= cfg.membership_tol:
            return 0.0 + 0.0j
        return complex(math.exp(-self.decay * (cfg.k0 ** 2 - axial ** 2)))


class TabulatedDensity:
    """Beam profile interpolated from angular samples.

    2D tables are cubic splines periodic in the angle; 3D tables are bicubic
    in (polar, azimuth) with the azimuth wrapped. Values off the beam
    hemisphere evaluate to zero regardless of the table. Derivative-quality
    interpolation needs a grid spacing of about one degree or finer.
    """

    kind = "tabulated"

    def __init__(self, cfg, theta_deg, values, phi_deg=None):
        self.cfg = cfg
        theta = np.asarray(theta_deg, dtype=float)
        values = np.asarray(values, dtype=complex)
        if cfg.d == 2:
            if phi_deg is not None:
                raise DimensionMismatch("2D tables take a single angle grid")
            if theta.ndim != 1 or theta.size < 4 or np.any(np.diff(theta) <= 0):
                raise ConfigError("2D table needs at least 4 strictly increasing angles")
            if np.any(theta < 0.0) or np.any(theta >= 360.0):
                raise ConfigError("table angles must lie in [0, 360)")
            if values.shape != theta.shape:
                raise ConfigError("table values must match the angle grid")
            theta_ext = np.append(theta, theta[0] + 360.0)
            vals_ext = np.append(values, values[0])
            self._theta0 = theta[0]
            self._re = CubicSpline(theta_ext, vals_ext.real, bc_type="periodic")
            self._im = CubicSpline(theta_ext, vals_ext.imag, bc_type="periodic")
        elif cfg.d == 3:
            if phi_deg is None:
                raise DimensionMismatch("3D tables need both angle grids")
            phi = np.asarray(phi_deg, dtype=float)
            if theta.ndim != 1 or phi.ndim != 1 or theta.size < 4 or phi.size < 4:
                raise ConfigError("3D table needs at least 4 points per angle grid")
            if np.any(np.diff(theta) <= 0) or np.any(np.diff(phi) <= 0):
                raise ConfigError("table angle grids must be strictly increasing")
            if np.any(theta < 0.0) or np.any(theta > 180.0):
                raise ConfigError("polar angles must lie in [0, 180]")
            if np.any(phi < 0.0) or np.any(phi >= 360.0):
                raise ConfigError("azimuth angles must lie in [0, 360)")
            if values.shape != (theta.size, phi.size):
                raise ConfigError(f"table values must have shape {(theta.size, phi.size)}")
            phi_ext = np.append(phi, phi[0] + 360.0)
            vals_ext = np.hstack([values, values[:, :1]])
            self._phi0 = phi[0]
            self._re = RectBivariateSpline(theta, phi_ext, vals_ext.real, kx=3, ky=3)
            self._im = RectBivariateSpline(theta, phi_ext, vals_ext.imag, kx=3, ky=3)
        else:
            raise DimensionMismatch("tabulated densities support dimensions 2 and 3")

    @classmethod
    def from_csv(cls, cfg, path_or_text):
        """Load a table from CSV.

        The header must read exactly ``theta_deg,re,im`` in 2D or
        ``theta_deg,phi_deg,re,im`` in 3D; 3D rows must form a complete
        grid. Accepts a filesystem path or the CSV text itself.
        """
        text = path_or_text
        if "\n" not in str(path_or_text):
            with open(path_or_text, "r", encoding="utf-8", newline="") as fh:
                text = fh.read()
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError("empty density table") from None
        rows = [row for row in reader if row]
        if cfg.d == 2:
            if header != ["theta_deg", "re", "im"]:
                raise ConfigError(f"2D table header must be theta_deg,re,im, got {','.join(header)}")
            try:
                data = np.array([[float(c) for c in row] for row in rows])
            except ValueError as exc:
                raise ConfigError(f"unparseable table row: {exc}") from None
            if data.ndim != 2 or data.shape[1] != 3:
                raise ConfigError("2D table rows must have 3 columns")
            order = np.argsort(data[:, 0], kind="stable")
            data = data[order]
            return cls(cfg, data[:, 0], data[:, 1] + 1j * data[:, 2])
        if header != ["theta_deg", "phi_deg", "re", "im"]:
            raise ConfigError(f"3D table header must be theta_deg,phi_deg,re,im, got {','.join(header)}")
        try:
            data = np.array([[float(c) for c in row] for row in rows])
        except ValueError as exc:
            raise ConfigError(f"unparseable table row: {exc}") from None
        if data.ndim != 2 or data.shape[1] != 4:
            raise ConfigError("3D table rows must have 4 columns")
        thetas = np.unique(data[:, 0])
        phis = np.unique(data[:, 1])
        if data.shape[0] != thetas.size * phis.size:
            raise ConfigError("3D table rows must form a complete (theta, phi) grid")
        grid = np.full((thetas.size, phis.size), np.nan + 0j)
        ti = np.searchsorted(thetas, data[:, 0])
        pi = np.searchsorted(phis, data[:, 1])
        grid[ti, pi] = data[:, 2] + 1j * data[:, 3]
        if np.any(np.isnan(grid.real)):
            raise ConfigError("3D table rows must form a complete (theta, phi) grid")
        return cls(cfg, thetas, grid, phi_deg=phis)

    def __call__(self, s):
        cfg = self.cfg
        s = snap_to_sphere(cfg, s)
        if float(np.dot(s, cfg.omega)) <= cfg.membership_tol:
            return 0.0 + 0.0j
        if cfg.d == 2:
            t = (math.degrees(math.atan2(s[1], s[0])) - self._theta0) % 360.0 + self._theta0
            return complex(float(self._re(t)), float(self._im(t)))
        ct = max(-1.0, min(1.0, s[2] / cfg.k0))
        theta = math.degrees(math.acos(ct))
        phi = (math.degrees(math.atan2(s[1], s[0])) - self._phi0) % 360.0 + self._phi0
        return complex(float(self._re(theta, phi)[0, 0]), float(self._im(theta, phi)[0, 0]))


def density_eval(density, s):
    """Evaluate a beam density at a sphere point (zero off the hemisphere)."""
    return density(s)


@dataclasses.dataclass(frozen=True)
class CouplingDerivatives:
    """Value and ambient derivatives of the coupling ratio at one point.

    ``grad_c``/``hess_c`` are the derivatives of the logarithm, defined
    branch-independently through ``grad b / b``; they are what the
    degeneracy identity consumes.
    """

    value: complex
    grad_b: np.ndarray
    grad_c: np.ndarray
    hess_b: np.ndarray | None = None
    hess_c: np.ndarray | None = None

    def dc(self, v):
        """Directional derivative of log b along ``v``."""
        return complex(np.dot(self.grad_c, np.asarray(v, dtype=float)))

    def d2c(self, u, v):
        """Second derivative of log b along the pair ``(u, v)``."""
        if self.hess_c is None:
            raise ValueError("second derivatives were not requested")
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return complex(u @ self.hess_c @ v)


@dataclasses.dataclass(frozen=True)
class GradientCheck:
    """Outcome of the gradient non-degeneracy test at a coupled direction."""

    passed: bool
    magnitude: float
    threshold: float

    def __bool__(self):
        return self.passed


class CouplingCoefficient:
    """The coupling ratio on its radial shell, with derivatives.

    The ratio is defined on directions whose reflection stays on the beam
    hemisphere, extended radially to the shell of relative width ``chi``:
    the value at ``x`` is the value at the sphere point ``k0 x / |x|``.
    Evaluations off the shell or off the coupled sector raise
    :class:`OutsideDomain`.
    """

    def __init__(self, density, cond_tol=DEFAULT_COND_TOL):
        self.density = density
        self.cfg = density.cfg
        self.cond_tol = float(cond_tol)

    # -- evaluation --------------------------------------------------------

    def _project(self, x):
        cfg = self.cfg
        x = np.asarray(x, dtype=float)
        if x.shape != (cfg.d,):
            raise DimensionMismatch(f"expected a point of shape ({cfg.d},), got {x.shape}")
        rho = np.linalg.norm(x) / cfg.k0
        if not (1.0 - cfg.chi < rho < 1.0 + cfg.chi):
            raise OutsideDomain(f"|x|/k0 = {rho:.6g} is outside the shell ({1 - cfg.chi:g}, {1 + cfg.chi:g})")
        sigma = x * (cfg.k0 / np.linalg.norm(x))
        if classify_sigma(cfg, sigma) is not SigmaClass.SIGMA2:
            raise OutsideDomain("direction is not in the coupled sector")
        return sigma

    def __call__(self, x):
        sigma = self._project(x)
        num = self.density(sigma)
        den = self.density(householder_reflect(self.cfg.nu, sigma))
        if den == 0:
            raise OutsideDomain("coupling ratio undefined where the density vanishes")
        return num / den

    # -- derivatives -------------------------------------------------------

    def derivatives(self, sigma, order=2):
        """Value, gradient and (for ``order >= 2``) Hessian at a sphere point.

        Gaussian profiles use closed forms for the log-ratio; tabulated
        profiles use central finite differences of the radial extension with
        step ``1e-5 * k0``.
        """
        if order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {order!r}")
        sigma = snap_to_sphere(self.cfg, np.asarray(sigma, dtype=float))
        self._project(sigma)  # domain check
        if isinstance(self.density, GaussianDensity):
            return self._gaussian_derivatives(sigma, order)
        return self._fd_derivatives(sigma, order)

    def _gaussian_derivatives(self, x, order):
        cfg = self.cfg
        scale = self.density.decay * cfg.k0 ** 2
        h_omega = cfg.h_omega
        u = float(np.dot(x, cfg.omega))
        v = float(np.dot(x, h_omega))
        r = float(np.dot(x, x))
        p = u * u - v * v
        grad_p = 2.0 * u * cfg.omega - 2.0 * v * h_omega
        grad_q = grad_p / r - 2.0 * p * x / r ** 2
        c_val = scale * p / r
        value = complex(math.exp(c_val))
        grad_c = (scale * grad_q).astype(complex)
        grad_b = value * grad_c
        if order == 1:
            return CouplingDerivatives(value=value, grad_b=grad_b, grad_c=grad_c)
        hess_p = 2.0 * (np.outer(cfg.omega, cfg.omega) - np.outer(h_omega, h_omega))
        hess_q = (
            hess_p / r
            - (2.0 / r ** 2) * (np.outer(grad_p, x) + np.outer(x, grad_p))
            - (2.0 * p / r ** 2) * np.eye(cfg.d)
            + (8.0 * p / r ** 3) * np.outer(x, x)
        )
        hess_c = (scale * hess_q).astype(complex)
        hess_b = value * (np.outer(grad_c, grad_c) + hess_c)
        return CouplingDerivatives(value=value, grad_b=grad_b, grad_c=grad_c, hess_b=hess_b, hess_c=hess_c)

    def _fd_derivatives(self, x, order):
        cfg = self.cfg
        h = FD_STEP_RTOL * cfg.k0
        d = cfg.d
        value = self(x)
        shifted = {}

        def at(*steps):
            key = steps
            if key not in shifted:
                dx = np.zeros(d)
                for i, s in steps:
                    dx[i] += s
                shifted[key] = self(x + h * dx)
            return shifted[key]

        grad_b = np.array([(at((i, 1)) - at((i, -1))) / (2 * h) for i in range(d)])
        grad_c = grad_b / value
        if order == 1:
            return CouplingDerivatives(value=value, grad_b=grad_b, grad_c=grad_c)
        hess_b = np.zeros((d, d), dtype=complex)
        for i in range(d):
            hess_b[i, i] = (at((i, 1)) - 2 * value + at((i, -1))) / h ** 2
            for j in range(i + 1, d):
                mixed = (at((i, 1), (j, 1)) - at((i, 1), (j, -1)) - at((i, -1), (j, 1)) + at((i, -1), (j, -1))) / (4 * h ** 2)
                hess_b[i, j] = hess_b[j, i] = mixed
        hess_c = hess_b / value - np.outer(grad_b, grad_b) / value ** 2
        return CouplingDerivatives(value=value, grad_b=grad_b, grad_c=grad_c, hess_b=hess_b, hess_c=hess_c)

    # -- non-degeneracy ----------------------------------------------------

    def gradient_condition(self, sigma):
        """Test whether the ratio's gradient escapes the degenerate direction.

        In dimension 3 this is the directional derivative along ``nu x
        sigma`` exceeding the threshold in modulus. In general dimension the
        test asks that the gradient, projected to the tangent space at
        ``sigma``, is not a complex multiple of the projected scan normal;
        the reported magnitude is then the smallest singular value of the
        normalized pair.
        """
        cfg = self.cfg
        sigma = snap_to_sphere(cfg, np.asarray(sigma, dtype=float))
        der = self.derivatives(sigma, order=1)
        if cfg.d == 3:
            mag = abs(complex(np.dot(der.grad_b, np.cross(cfg.nu, sigma))))
            return GradientCheck(passed=mag > self.cond_tol, magnitude=mag, threshold=self.cond_tol)
        proj = lambda w: w - (w @ sigma) * sigma / cfg.k0 ** 2
        g = proj(der.grad_b)
        n = proj(cfg.nu.astype(complex))
        gn = float(np.linalg.norm(g))
        nn = float(np.linalg.norm(n))
        if gn == 0.0:
            return GradientCheck(passed=False, magnitude=0.0, threshold=self.cond_tol)
        if nn <= 1e-12:
            # the scan normal is radial here, so the excluded set is {0}
            return GradientCheck(passed=gn > self.cond_tol, magnitude=gn, threshold=self.cond_tol)
        smin = float(np.linalg.svd(np.column_stack([g / gn, n / nn]), compute_uv=False)[-1])
        return GradientCheck(passed=smin > self.cond_tol, magnitude=smin, threshold=self.cond_tol)


def coupling_b(bc, x):
    """Evaluate a coupling ratio at a shell point."""
    return bc(x)


def coupling_b_derivatives(bc, sigma, order=2):
    """Derivatives of a coupling ratio at a sphere point."""
    return bc.derivatives(sigma, order=order)


def gradient_condition(bc, sigma):
    """Run the gradient non-degeneracy test at a coupled direction."""
    return bc.gradient_condition(sigma)
