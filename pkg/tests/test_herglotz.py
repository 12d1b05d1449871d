import math

import numpy as np
import pytest

from scanbeam.errors import ConfigError, DimensionMismatch, OutsideDomain
from scanbeam.geometry import (
    SigmaClass,
    classify_sigma,
    householder_reflect,
    sphere_point_2d,
    sphere_point_3d,
)
from scanbeam.herglotz import (
    CouplingCoefficient,
    GaussianDensity,
    TabulatedDensity,
    coupling_b,
    coupling_b_derivatives,
    density_eval,
    gradient_condition,
)
from conftest import random_sigma2, random_sphere_point


@pytest.fixture
def bc_a(cfg_a):
    return CouplingCoefficient(GaussianDensity(cfg_a, decay=1.0))


@pytest.fixture
def bc_b(cfg_b):
    return CouplingCoefficient(GaussianDensity(cfg_b, decay=1.0))


# --------------------------------------------------------------------------
# density evaluation


def test_gaussian_density_example(cfg_a):
    a = GaussianDensity(cfg_a, decay=1.0)
    s = sphere_point_2d(1.0, 120.0)
    # |s_perp|^2 = 1 - sin(120)^2 = 1/4
    assert density_eval(a, s) == pytest.approx(math.exp(-0.25), abs=1e-15)
    assert density_eval(a, sphere_point_2d(1.0, -30.0)) == 0.0


def test_gaussian_density_support_law(cfg_b, rng):
    a = GaussianDensity(cfg_b, decay=2.0)
    for _ in range(10_000):
        s = random_sphere_point(rng, cfg_b)
        val = density_eval(a, s)
        if np.dot(s, cfg_b.omega) > 1e-9:
            assert val.real > 0.0
        elif np.dot(s, cfg_b.omega) < -1e-9:
            assert val == 0.0


def test_constant_profile_is_one_on_the_hemisphere(cfg_a):
    a = GaussianDensity(cfg_a, decay=0.0)
    assert density_eval(a, sphere_point_2d(1.0, 90.0)) == 1.0
    assert density_eval(a, sphere_point_2d(1.0, 30.0)) == 1.0


def test_gaussian_rejects_negative_decay(cfg_a):
    with pytest.raises(ConfigError):
        GaussianDensity(cfg_a, decay=-1.0)


# --------------------------------------------------------------------------
# coupling ratio: values


def test_coupling_example(bc_a):
    # sigma at 120 deg reflects to 150 deg; axial components sin(120), sin(150)
    sigma = sphere_point_2d(1.0, 120.0)
    assert coupling_b(bc_a, sigma) == pytest.approx(math.exp(0.5), abs=1e-12)


def test_coupling_matches_closed_form(bc_b, cfg_b, rng):
    # ratio of density values against exp of the axial-component difference
    for _ in range(300):
        sigma = random_sigma2(rng, cfg_b)
        h_sigma = householder_reflect(cfg_b.nu, sigma)
        expected = math.exp(np.dot(sigma, cfg_b.omega) ** 2 - np.dot(h_sigma, cfg_b.omega) ** 2)
        assert coupling_b(bc_b, sigma) == pytest.approx(expected, rel=1e-12)


def test_coupling_reciprocity(bc_a, bc_b, cfg_a, cfg_b, rng):
    for bc, cfg in ((bc_a, cfg_a), (bc_b, cfg_b)):
        for _ in range(1000):
            sigma = random_sigma2(rng, cfg)
            prod = coupling_b(bc, sigma) * coupling_b(bc, householder_reflect(cfg.nu, sigma))
            assert prod == pytest.approx(1.0, abs=1e-12)


def test_coupling_is_radially_constant_on_the_shell(bc_a, cfg_a, rng):
    for _ in range(100):
        sigma = random_sigma2(rng, cfg_a)
        base = coupling_b(bc_a, sigma)
        for scale in (0.6, 1.0, 1.4):
            assert coupling_b(bc_a, scale * sigma) == pytest.approx(base, abs=1e-12)


def test_coupling_domain_walls(bc_a, cfg_a):
    sigma2 = sphere_point_2d(1.0, 120.0)
    with pytest.raises(OutsideDomain):
        coupling_b(bc_a, 0.4 * sigma2)  # below the shell
    with pytest.raises(OutsideDomain):
        coupling_b(bc_a, 1.6 * sigma2)  # above the shell
    with pytest.raises(OutsideDomain):
        coupling_b(bc_a, sphere_point_2d(1.0, 45.0))  # uncoupled direction
    with pytest.raises(OutsideDomain):
        coupling_b(bc_a, sphere_point_2d(1.0, -90.0))  # beam complement
    with pytest.raises(DimensionMismatch):
        coupling_b(bc_a, np.array([1.0, 0.0, 0.0]))


def test_constant_coupling_is_one(cfg_d, rng):
    bc = CouplingCoefficient(GaussianDensity(cfg_d, decay=0.0))
    for _ in range(50):
        assert coupling_b(bc, random_sigma2(rng, cfg_d)) == 1.0


# --------------------------------------------------------------------------
# coupling ratio: derivatives


def _fd_oracle(bc, x, h):
    """Plain central differences of the ratio, independent of the library's
    derivative code paths."""
    d = x.size
    grad = np.zeros(d, dtype=complex)
    hess = np.zeros((d, d), dtype=complex)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        grad[i] = (bc(x + ei) - bc(x - ei)) / (2 * h)
        hess[i, i] = (bc(x + ei) - 2 * bc(x) + bc(x - ei)) / h**2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h
            hess[i, j] = hess[j, i] = (bc(x + ei + ej) - bc(x + ei - ej) - bc(x - ei + ej) + bc(x - ei - ej)) / (4 * h**2)
    return grad, hess


@pytest.mark.parametrize("fixture_name", ["bc_a", "bc_b"])
def test_gaussian_derivatives_match_finite_differences(fixture_name, request, rng):
    bc = request.getfixturevalue(fixture_name)
    cfg = bc.cfg
    for _ in range(100):
        sigma = random_sigma2(rng, cfg)
        der = coupling_b_derivatives(bc, sigma, order=2)
        grad_fd, hess_fd = _fd_oracle(bc, sigma, h=1e-5 * cfg.k0)
        scale_g = max(1.0, np.linalg.norm(grad_fd))
        scale_h = max(1.0, np.linalg.norm(hess_fd))
        assert np.linalg.norm(der.grad_b - grad_fd) / scale_g <= 1e-5
        assert np.linalg.norm(der.hess_b - hess_fd) / scale_h <= 1e-5


def test_derivative_value_agrees_with_ratio_route(bc_a, rng):
    for _ in range(100):
        sigma = random_sigma2(rng, bc_a.cfg)
        assert coupling_b_derivatives(bc_a, sigma).value == pytest.approx(coupling_b(bc_a, sigma), rel=1e-12)


def test_gradient_is_tangent_to_the_sphere(bc_b, rng):
    # the ratio is radially constant, so its gradient never points radially
    for _ in range(200):
        sigma = random_sigma2(rng, bc_b.cfg)
        der = coupling_b_derivatives(bc_b, sigma, order=1)
        assert abs(np.dot(der.grad_b, sigma)) <= 1e-10


def test_hessian_is_symmetric(bc_b, rng):
    sigma = random_sigma2(rng, bc_b.cfg)
    der = coupling_b_derivatives(bc_b, sigma, order=2)
    assert np.allclose(der.hess_b, der.hess_b.T, atol=1e-12)
    assert np.allclose(der.hess_c, der.hess_c.T, atol=1e-12)


def test_log_derivatives_consistent(bc_b, rng):
    sigma = random_sigma2(rng, bc_b.cfg)
    der = coupling_b_derivatives(bc_b, sigma, order=2)
    assert np.allclose(der.grad_b, der.value * der.grad_c, atol=1e-12)
    expected = der.value * (np.outer(der.grad_c, der.grad_c) + der.hess_c)
    assert np.allclose(der.hess_b, expected, atol=1e-12)
    assert der.dc(sigma) == pytest.approx(0.0, abs=1e-10)


def test_derivatives_reject_bad_order(bc_a):
    with pytest.raises(ValueError):
        coupling_b_derivatives(bc_a, sphere_point_2d(1.0, 120.0), order=3)


# --------------------------------------------------------------------------
# gradient non-degeneracy test


def test_gradient_condition_constant_profile_fails(cfg_b, rng):
    bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=0.0))
    for _ in range(20):
        check = gradient_condition(bc, random_sigma2(rng, cfg_b))
        assert not check
        assert check.magnitude <= 1e-14


def test_gradient_condition_generic_3d_passes(bc_b, rng):
    passed = 0
    for _ in range(100):
        check = gradient_condition(bc_b, random_sigma2(rng, bc_b.cfg))
        passed += bool(check)
    assert passed >= 95  # random directions can land near the null set


def test_gradient_condition_fails_in_2d(bc_a, rng):
    # in the plane the tangent space is one-dimensional, so the gradient is
    # always a multiple of the projected scan normal
    for _ in range(100):
        check = gradient_condition(bc_a, random_sigma2(rng, bc_a.cfg))
        assert not check


def test_gradient_condition_reports_threshold(bc_b):
    sigma = sphere_point_3d(1.0, 40.0, 250.0)
    if classify_sigma(bc_b.cfg, sigma) is SigmaClass.SIGMA2:
        check = gradient_condition(bc_b, sigma)
        assert check.threshold == bc_b.cond_tol


# --------------------------------------------------------------------------
# tabulated densities


def _tabulated_from_gaussian_2d(cfg, decay=1.0, step_deg=1.0):
    gauss = GaussianDensity(cfg, decay=decay)
    thetas = np.arange(0.0, 360.0, step_deg)
    vals = np.array([density_eval(gauss, sphere_point_2d(cfg.k0, t)) for t in thetas])
    return TabulatedDensity(cfg, thetas, vals)


def _away_from_support_edge(cfg, rng, margin=0.15, tries=500):
    """Coupled direction whose reflection also stays off the support edge,
    where the profile's kink makes spline ringing unavoidable."""
    for _ in range(tries):
        sigma = random_sigma2(rng, cfg)
        h_sigma = householder_reflect(cfg.nu, sigma)
        if np.dot(sigma, cfg.omega) > margin and np.dot(h_sigma, cfg.omega) > margin:
            return sigma
    raise AssertionError("sampling failed")


def test_tabulated_matches_sampled_gaussian_2d(cfg_a, rng):
    gauss = GaussianDensity(cfg_a, decay=1.0)
    tab = _tabulated_from_gaussian_2d(cfg_a)
    bc_g = CouplingCoefficient(gauss)
    bc_t = CouplingCoefficient(tab)
    for _ in range(200):
        sigma = _away_from_support_edge(cfg_a, rng)
        assert density_eval(tab, sigma) == pytest.approx(density_eval(gauss, sigma), abs=1e-6)
        assert coupling_b(bc_t, sigma) == pytest.approx(coupling_b(bc_g, sigma), abs=1e-5)


def test_tabulated_smooth_profile_is_near_exact(cfg_a, rng):
    # a table of a smooth periodic profile avoids the support kink entirely,
    # so cubic interpolation should be accurate to spline truncation error
    profile = lambda t: math.exp(0.3 * math.cos(math.radians(t))) + 0.2j * math.sin(math.radians(t))
    thetas = np.arange(0.0, 360.0, 1.0)
    tab = TabulatedDensity(cfg_a, thetas, np.array([profile(t) for t in thetas]))
    bc_t = CouplingCoefficient(tab)
    for _ in range(200):
        sigma = random_sigma2(rng, cfg_a)
        t = math.degrees(math.atan2(sigma[1], sigma[0])) % 360.0
        assert density_eval(tab, sigma) == pytest.approx(profile(t), abs=1e-8)
        h_sigma = householder_reflect(cfg_a.nu, sigma)
        th = math.degrees(math.atan2(h_sigma[1], h_sigma[0])) % 360.0
        assert coupling_b(bc_t, sigma) == pytest.approx(profile(t) / profile(th), abs=1e-7)


def test_tabulated_derivatives_track_gaussian_2d(cfg_a, rng):
    bc_g = CouplingCoefficient(GaussianDensity(cfg_a, decay=1.0))
    bc_t = CouplingCoefficient(_tabulated_from_gaussian_2d(cfg_a, step_deg=0.5))
    for _ in range(20):
        sigma = _away_from_support_edge(cfg_a, rng)
        dg = coupling_b_derivatives(bc_g, sigma, order=1)
        dt = coupling_b_derivatives(bc_t, sigma, order=1)
        assert np.linalg.norm(dt.grad_b - dg.grad_b) <= 1e-4 * max(1.0, np.linalg.norm(dg.grad_b))


def test_tabulated_3d_grid(cfg_b, rng):
    gauss = GaussianDensity(cfg_b, decay=1.0)
    thetas = np.linspace(0.0, 180.0, 181)
    phis = np.arange(0.0, 360.0, 2.0)
    grid = np.empty((thetas.size, phis.size), dtype=complex)
    for i, t in enumerate(thetas):
        for j, p in enumerate(phis):
            grid[i, j] = density_eval(gauss, sphere_point_3d(1.0, t, p))
    tab = TabulatedDensity(cfg_b, thetas, grid, phi_deg=phis)
    for _ in range(100):
        sigma = _away_from_support_edge(cfg_b, rng)
        assert density_eval(tab, sigma) == pytest.approx(density_eval(gauss, sigma), abs=1e-5)


def test_tabulated_csv_round_trip(cfg_a, tmp_path):
    lines = ["theta_deg,re,im"]
    thetas = np.arange(0.0, 360.0, 5.0)
    for t in thetas:
        lines.append(f"{t},{math.cos(math.radians(t)) ** 2},{0.1}")
    path = tmp_path / "beam.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tab = TabulatedDensity.from_csv(cfg_a, str(path))
    val = density_eval(tab, sphere_point_2d(1.0, 90.0))
    assert val == pytest.approx(0.0 + 0.1j, abs=1e-9)


@pytest.mark.parametrize(
    "text",
    [
        "angle,re,im\n0,1,0\n",  # wrong header
        "theta_deg,re,im\n0,1\n",  # short row
        "theta_deg,re,im\n0,one,0\n",  # unparseable
        "",  # empty
    ],
)
def test_tabulated_csv_rejects_malformed_input(cfg_a, text):
    with pytest.raises(ConfigError):
        TabulatedDensity.from_csv(cfg_a, text if text else "\n")


def test_tabulated_csv_3d_requires_complete_grid(cfg_b):
    text = "theta_deg,phi_deg,re,im\n" + "\n".join(
        f"{t},{p},1.0,0.0" for t in (10.0, 20.0, 30.0, 40.0) for p in (0.0, 90.0, 180.0, 270.0)
    )
    tab = TabulatedDensity.from_csv(cfg_b, text + "\n")
    assert tab.kind == "tabulated"
    with pytest.raises(ConfigError):
        TabulatedDensity.from_csv(cfg_b, text.rsplit("\n", 1)[0] + "\n")
