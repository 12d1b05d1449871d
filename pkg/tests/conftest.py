import math

import numpy as np
import pytest

from scanbeam.geometry import (
    ScanConfig,
    SigmaClass,
    classify_sigma,
    hemisphere_contains,
    sigma_arcs,
    sigma_margins,
    sphere_point_2d,
)

SQ2 = math.sqrt(0.5)


@pytest.fixture
def cfg_a():
    """2D, beam straight up, scan normal at 45 degrees."""
    return ScanConfig(d=2, k0=1.0, omega=(0.0, 1.0), nu=(SQ2, SQ2))


@pytest.fixture
def cfg_b():
    """3D, beam along +z, scan normal tilted into the yz-plane."""
    return ScanConfig(d=3, k0=1.0, omega=(0.0, 0.0, 1.0), nu=(0.0, SQ2, SQ2))


@pytest.fixture
def cfg_d():
    """2D, beam along +x, scan normal at 45 degrees; every coupled component
    away from the degenerate lines closes into a four-cycle."""
    return ScanConfig(d=2, k0=1.0, omega=(1.0, 0.0), nu=(SQ2, SQ2))


@pytest.fixture
def cfg_e():
    """2D, beam along +x, scan normal at 120 degrees; has a nonempty anchored
    region reachable through a single coupling step."""
    return ScanConfig(d=2, k0=1.0, omega=(1.0, 0.0), nu=(-0.5, math.sqrt(3.0) / 2.0))


@pytest.fixture
def cfg_h4():
    """4D validation geometry: beam along the receiver axis, scan normal
    tilted halfway into the last two coordinates."""
    return ScanConfig(d=4, k0=1.0, omega=(0.0, 0.0, 0.0, 1.0), nu=(0.0, 0.0, SQ2, SQ2))


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


def random_sphere_point(rng, cfg):
    """Uniform point on the radius-k0 sphere."""
    v = rng.normal(size=cfg.d)
    return cfg.k0 * v / np.linalg.norm(v)


def random_hemisphere_point(rng, cfg, v, max_tries=200):
    for _ in range(max_tries):
        s = random_sphere_point(rng, cfg)
        if hemisphere_contains(cfg, v, s):
            return s
    raise AssertionError("hemisphere sampling failed")


def random_sigma2(rng, cfg, max_tries=500):
    """Uniform direction in the coupled sector, by rejection."""
    for _ in range(max_tries):
        s = random_sphere_point(rng, cfg)
        if classify_sigma(cfg, s) is SigmaClass.SIGMA2:
            return s
    raise AssertionError(f"no coupled direction found in {max_tries} draws")


def sample_arc_angle(rng, arcs, margin=1e-6):
    """Uniform angle inside an ArcSet, kept away from the endpoints."""
    widths = np.array([hi - lo for lo, hi in arcs.intervals])
    widths = np.maximum(widths - 2.0 * margin, 0.0)
    if widths.sum() <= 0.0:
        raise AssertionError("arc set too thin to sample")
    i = rng.choice(len(widths), p=widths / widths.sum())
    lo, hi = arcs.intervals[i]
    return rng.uniform(lo + margin, hi - margin)


def random_anchor_3d(rng, cfg, margin=0.1, max_tries=2000):
    """Random coupled anchor (eta, sigma) for a 3D config, with room for the
    local parameter shifts: hemisphere margins exceed `margin` on both sides
    of the coupling reflection and the anchor triple is solidly independent."""
    for _ in range(max_tries):
        sigma = random_sphere_point(rng, cfg)
        m1, m2 = sigma_margins(cfg, sigma)
        if m1 < margin * cfg.k0 or m2 < margin * cfg.k0:
            continue
        eta = random_sphere_point(rng, cfg)
        if eta[-1] < margin * cfg.k0:
            continue
        y = eta - sigma
        if np.linalg.norm(y) < margin * cfg.k0:
            continue
        if abs(np.dot(sigma, np.cross(cfg.nu, y))) < 0.02 * cfg.k0**3:
            continue
        return eta, sigma
    raise AssertionError("3D anchor sampling failed")


def random_coupled_base_hd(rng, cfg, margin=0.05, max_tries=2000):
    """Random y = eta - sigma in a high-dimensional config, inside the open
    ball of diameter twice the sphere and solidly off the scan-normal line."""
    for _ in range(max_tries):
        sigma = random_sigma2(rng, cfg)
        m1, m2 = sigma_margins(cfg, sigma)
        if m1 < margin * cfg.k0 or m2 < margin * cfg.k0:
            continue
        eta = random_sphere_point(rng, cfg)
        if eta[-1] < margin * cfg.k0:
            continue
        y = eta - sigma
        ny = np.linalg.norm(y)
        if ny < margin * cfg.k0 or ny > (2.0 - margin) * cfg.k0:
            continue
        off_axis = y - np.dot(y, cfg.nu) * cfg.nu
        if np.linalg.norm(off_axis) < margin * cfg.k0:
            continue
        return y
    raise AssertionError("high-dimensional base sampling failed")


def random_anchor_2d(rng, cfg, margin=1e-6, max_tries=500):
    """Random coupled anchor pair (eta, sigma) for a 2D config.

    eta is uniform on the receiver half-circle, sigma uniform in the coupled
    arcs, both kept a small margin away from every decision boundary.
    """
    _, coupled = sigma_arcs(cfg)
    for _ in range(max_tries):
        sigma = sphere_point_2d(cfg.k0, math.degrees(sample_arc_angle(rng, arcs=coupled, margin=margin)))
        eta = random_sphere_point(rng, cfg)
        if not hemisphere_contains(cfg, cfg.e_last, eta):
            continue
        if abs(eta[1]) < margin * cfg.k0 or abs(np.dot(eta, cfg.nu)) < margin * cfg.k0:
            continue
        if abs(sigma[1]) < margin * cfg.k0 or abs(np.dot(sigma, cfg.nu)) < margin * cfg.k0:
            continue
        y = eta - sigma
        if np.linalg.norm(y) < margin * cfg.k0 or np.linalg.norm(y) > 2.0 * cfg.k0 - margin * cfg.k0:
            continue
        return eta, sigma
    raise AssertionError("anchor sampling failed")
