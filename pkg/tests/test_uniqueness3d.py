import math

import numpy as np
import pytest

from conftest import random_anchor_3d, random_sphere_point

from scanbeam.errors import (
    DegenerateAnchor,
    DegenerateDirection,
    DimensionMismatch,
    LeftDomain,
    OutsideDomain,
)
from scanbeam.geometry import householder_reflect, perp_basis, snap_to_sphere, unit
from scanbeam.herglotz import CouplingCoefficient, GaussianDensity, gradient_condition
from scanbeam.uniqueness3d import (
    DET_TOL,
    appendix_coeffs,
    degeneracy_identity,
    det_search,
    eta_probes,
    local_system,
    newton_hat,
    sigma_hat_derivatives,
)


def _nearby_receiver(rng, cfg, eta, radius=0.05):
    u, v = perp_basis(eta)
    t = rng.uniform(0.0, radius)
    psi = rng.uniform(0.0, 2.0 * math.pi)
    p = math.cos(t) * eta / cfg.k0 + math.sin(t) * (math.cos(psi) * u + math.sin(psi) * v)
    return cfg.k0 * p / np.linalg.norm(p)


class TestNewton:
    def test_zero_shift_returns_anchor(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        sol = newton_hat(cfg_b, eta, sigma, np.zeros(3))
        np.testing.assert_allclose(sol.eta_hat, eta, atol=1e-12)
        np.testing.assert_allclose(sol.sigma_hat, sigma, atol=1e-12)
        assert sol.residual <= 1e-12

    def test_receiver_shift_keeps_incidence(self, cfg_b, rng):
        """Moving the probe by a receiver difference leaves sigma in place."""
        eta, sigma = random_anchor_3d(rng, cfg_b)
        for _ in range(20):
            eta_t = _nearby_receiver(rng, cfg_b, eta)
            sol = newton_hat(cfg_b, eta, sigma, eta_t - eta)
            np.testing.assert_allclose(sol.sigma_hat, sigma, atol=1e-10)
            np.testing.assert_allclose(sol.eta_hat, eta_t, atol=1e-10)

    def test_generic_shift_satisfies_geometry(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        w = np.array([0.004, -0.006, 0.003])
        delta, eps = 0.01, 0.02
        sol = newton_hat(cfg_b, eta, sigma, w, delta, eps)
        assert sol.residual <= 1e-12
        k0 = cfg_b.k0
        assert abs(np.dot(sol.eta_hat, sol.eta_hat) - k0**2) <= 1e-12
        assert abs(np.dot(sol.sigma_hat, sol.sigma_hat) - k0**2) <= 1e-12
        y = eta - sigma
        z = y + 2.0 * np.dot(sigma, cfg_b.nu) * cfg_b.nu
        np.testing.assert_allclose(sol.eta_hat - sol.sigma_hat, y + w + delta * cfg_b.nu, atol=1e-11)
        reflected = sol.eta_hat - householder_reflect(cfg_b.nu, sol.sigma_hat)
        np.testing.assert_allclose(reflected, z + w + eps * cfg_b.nu, atol=1e-11)

    def test_smooth_dependence(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        base = newton_hat(cfg_b, eta, sigma, np.array([0.01, 0.0, -0.01]), 0.005, 0.01)
        h = 1e-6
        moved = newton_hat(cfg_b, eta, sigma, np.array([0.01 + h, 0.0, -0.01]), 0.005 + h, 0.01)
        drift = np.linalg.norm(moved.sigma_hat - base.sigma_hat)
        lipschitz = drift / (h * math.sqrt(2.0))
        assert np.isfinite(lipschitz)
        assert lipschitz < 1e3

    def test_dependent_anchor_rejected(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        coplanar = cfg_b.k0 * unit(cfg_b.nu + sigma)
        with pytest.raises(DegenerateAnchor):
            newton_hat(cfg_b, coplanar, sigma, np.zeros(3))

    def test_domain_preconditions(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        with pytest.raises(OutsideDomain):
            newton_hat(cfg_b, -eta, sigma, np.zeros(3))
        uncoupled = np.array([0.0, 0.9, math.sqrt(1.0 - 0.81)])  # sigma_y > 0
        with pytest.raises(OutsideDomain):
            newton_hat(cfg_b, eta, uncoupled, np.zeros(3))
        with pytest.raises(DimensionMismatch):
            newton_hat(
                type(cfg_b)(d=2, k0=1.0, omega=(0.0, 1.0), nu=(1.0, 1.0)),
                np.array([0.0, 1.0]),
                np.array([1.0, 0.0]),
                np.zeros(2),
            )

    def test_leaving_coupled_sector_flagged(self, cfg_b):
        # the coupled sector of this scan is {sigma_z > 0, sigma_y < 0};
        # start a hair inside the sigma_y wall and slide epsilon across it
        sigma = cfg_b.k0 * unit(np.array([0.6, -1e-3, 0.8]))
        eta = np.array([0.0, 0.0, 1.0])
        with pytest.raises(LeftDomain):
            newton_hat(cfg_b, eta, sigma, np.zeros(3), 0.0, 0.02)


class TestLocalSystem:
    def test_pattern_and_points(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=1.0))
        w = np.array([0.0, 0.01, -0.01])
        delta, eps = 0.015, 0.02
        system = local_system(cfg_b, bc, eta, sigma, w, delta, eps)
        mat = system.matrix
        zero_mask = mat == 0
        expected_zeros = np.array(
            [
                [False, True, False, True],
                [False, True, True, False],
                [True, False, False, True],
                [True, False, True, False],
            ]
        )
        assert (zero_mask == expected_zeros).all()
        for r, h in enumerate(system.hats):
            col = 0 if r < 2 else 1
            assert mat[r, col] == pytest.approx(bc(h.sigma_hat))
        y = eta - sigma
        z = y + 2.0 * np.dot(sigma, cfg_b.nu) * cfg_b.nu
        np.testing.assert_allclose(system.points[0], y + w, atol=1e-12)
        np.testing.assert_allclose(system.points[1], y + w + delta * cfg_b.nu, atol=1e-12)
        np.testing.assert_allclose(system.points[2], z + w, atol=1e-12)
        np.testing.assert_allclose(system.points[3], z + w + eps * cfg_b.nu, atol=1e-12)

    def test_constant_coupling_det_zero(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=0.0))
        system = local_system(cfg_b, bc, eta, sigma, np.zeros(3), 0.02, 0.02)
        assert abs(system.det) <= 1e-14

    def test_repeated_slide_det_zero(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=1.0))
        assert abs(local_system(cfg_b, bc, eta, sigma, np.zeros(3), 0.0, 0.02).det) <= 1e-14
        assert abs(local_system(cfg_b, bc, eta, sigma, np.zeros(3), 0.02, 0.0).det) <= 1e-14

    def test_gaussian_det_nonzero(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=1.0))
        system = local_system(cfg_b, bc, eta, sigma, np.zeros(3), 0.05, 0.05)
        assert abs(system.det) > 0.0

    def test_cofactor_identity_random_matrices(self, rng):
        """The zero pattern forces det = b2 b3 - b1 b4 for any entries."""
        for _ in range(1000):
            b = rng.normal(size=4) + 1j * rng.normal(size=4)
            mat = np.array(
                [
                    [b[0], 0, 1, 0],
                    [b[1], 0, 0, 1],
                    [0, b[2], 1, 0],
                    [0, b[3], 0, 1],
                ],
                dtype=complex,
            )
            direct = np.linalg.det(mat)
            cofactor = b[1] * b[2] - b[0] * b[3]
            assert abs(direct - cofactor) <= 1e-12 * max(1.0, abs(cofactor))


class TestDetSearch:
    def test_gaussian_found(self, cfg_b, rng):
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=1.0))
        eta, sigma = random_anchor_3d(rng, cfg_b)
        while not gradient_condition(bc, sigma):
            eta, sigma = random_anchor_3d(rng, cfg_b)
        result = det_search(cfg_b, bc, eta, sigma)
        assert result.found
        assert result.abs_det > DET_TOL
        assert result.system is not None
        assert result.evaluations > 0
        # reported parameters reproduce the reported determinant
        redo = local_system(cfg_b, bc, eta, sigma, result.w, result.delta, result.epsilon)
        assert abs(redo.det - result.det) <= 1e-12 * max(1.0, abs(result.det))

    def test_constant_not_found(self, cfg_b, rng):
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=0.0))
        eta, sigma = random_anchor_3d(rng, cfg_b)
        result = det_search(cfg_b, bc, eta, sigma)
        assert not result.found
        assert result.abs_det <= DET_TOL
        assert result.evaluations > 0

    def test_dependent_anchor_rejected(self, cfg_b, rng):
        _, sigma = random_anchor_3d(rng, cfg_b)
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=1.0))
        coplanar = cfg_b.k0 * unit(cfg_b.nu + sigma)
        with pytest.raises(DegenerateAnchor):
            det_search(cfg_b, bc, coplanar, sigma)

    def test_recovery_pipeline(self, cfg_b, rng):
        """When the search finds a usable determinant, solving the local
        system with simulated measurements recovers the planted profile."""
        density = GaussianDensity(cfg_b, decay=1.0)
        bc = CouplingCoefficient(density)
        x0 = np.array([0.4, -0.2, 0.3])
        phi = lambda xi: (1.3 - 0.7j) * np.exp(1j * np.dot(xi, x0))

        def source(eta_hat, sigma_hat):
            h_sigma = householder_reflect(cfg_b.nu, sigma_hat)
            return density(sigma_hat) * phi(eta_hat - sigma_hat) + density(h_sigma) * phi(
                eta_hat - h_sigma
            )

        eta, sigma = random_anchor_3d(rng, cfg_b)
        while not gradient_condition(bc, sigma):
            eta, sigma = random_anchor_3d(rng, cfg_b)
        result = det_search(cfg_b, bc, eta, sigma)
        assert result.found
        system = local_system(
            cfg_b, bc, eta, sigma, result.w, result.delta, result.epsilon, source=source
        )
        solved = np.linalg.solve(system.matrix, system.rhs)
        truth = np.array([phi(p) for p in system.points])
        np.testing.assert_allclose(solved, truth, rtol=1e-8)


class TestAppendixCoeffs:
    def test_identities_hold_at_random_pairs(self, cfg_b, rng):
        for _ in range(100):
            eta, sigma = random_anchor_3d(rng, cfg_b)
            co = appendix_coeffs(cfg_b, sigma, eta)
            t2 = float(np.dot(eta, np.cross(cfg_b.nu, sigma)))
            assert co.mu == pytest.approx(-1.0 / t2, rel=1e-12)
            t1, _, t3 = co.coords
            assert np.dot(eta, cfg_b.nu) == pytest.approx(
                t1 * np.dot(sigma, cfg_b.nu) + t3, abs=1e-12
            )
            basis = (cfg_b.nu, eta - sigma, sigma)
            gram = np.array(
                [[np.dot(v, b) for b in basis] for v in (co.v1, co.v2, co.v3)]
            )
            assert np.max(np.abs(gram - np.eye(3))) <= 1e-10

    def test_coefficients_match_cross_product_forms(self, cfg_b, rng):
        # The coordinate expressions must agree with the direct vector forms
        # gamma = (<eta~,nu><t,n> - |t|^2/2) / k0^2,
        # beta = 1/mu^2 - (<sigma,eta~> - k0^2) gamma, alpha = <sigma,nu> gamma.
        k0sq = cfg_b.k0**2
        for _ in range(50):
            eta, sigma = random_anchor_3d(rng, cfg_b)
            co = appendix_coeffs(cfg_b, sigma, eta)
            t = np.cross(eta, sigma)
            n = np.cross(cfg_b.nu, sigma)
            gamma_vec = (
                np.dot(eta, cfg_b.nu) * np.dot(t, n) - 0.5 * np.dot(t, t)
            ) / k0sq
            beta_vec = 1.0 / co.mu**2 - (np.dot(sigma, eta) - k0sq) * gamma_vec
            alpha_vec = np.dot(sigma, cfg_b.nu) * gamma_vec
            scale = 1.0 + abs(gamma_vec)
            assert abs(co.gamma - gamma_vec) <= 1e-10 * scale
            assert abs(co.beta - beta_vec) <= 1e-10 * (1.0 + abs(beta_vec))
            assert abs(co.alpha - alpha_vec) <= 1e-10 * (1.0 + abs(alpha_vec))

    def test_coplanar_direction_rejected(self, cfg_b, rng):
        _, sigma = random_anchor_3d(rng, cfg_b)
        bad = cfg_b.k0 * unit(cfg_b.nu + 0.5 * sigma)
        with pytest.raises(DegenerateDirection):
            appendix_coeffs(cfg_b, sigma, bad)


class TestSigmaHatDerivatives:
    def test_projection_identities(self, cfg_b, rng):
        for _ in range(25):
            eta, sigma = random_anchor_3d(rng, cfg_b)
            d_eps, d_delta, d_mixed = sigma_hat_derivatives(cfg_b, sigma, eta)
            assert np.dot(d_eps, sigma) == pytest.approx(0.0, abs=1e-12)
            assert np.dot(d_delta, sigma) == pytest.approx(0.0, abs=1e-12)
            assert np.dot(d_mixed, sigma) == pytest.approx(0.0, abs=1e-12)
            assert np.dot(d_eps, cfg_b.nu) == pytest.approx(0.5, abs=1e-12)
            assert np.dot(d_delta, cfg_b.nu) == pytest.approx(-0.5, abs=1e-12)

    def test_first_derivatives_match_differences(self, cfg_b, rng):
        h = 1e-4
        done = 0
        while done < 15:
            eta, sigma = random_anchor_3d(rng, cfg_b)
            eta_t = _nearby_receiver(rng, cfg_b, eta, radius=0.03)
            # truncation error scales with mu, so keep well-conditioned anchors
            if abs(np.dot(np.cross(cfg_b.nu, eta_t), sigma)) < 0.2 * cfg_b.k0**3:
                continue
            done += 1
            d_eps, d_delta, _ = sigma_hat_derivatives(cfg_b, sigma, eta_t)
            w = eta_t - eta
            fd_eps = (
                newton_hat(cfg_b, eta, sigma, w, 0.0, h).sigma_hat
                - newton_hat(cfg_b, eta, sigma, w, 0.0, -h).sigma_hat
            ) / (2.0 * h)
            fd_delta = (
                newton_hat(cfg_b, eta, sigma, w, h, 0.0).sigma_hat
                - newton_hat(cfg_b, eta, sigma, w, -h, 0.0).sigma_hat
            ) / (2.0 * h)
            assert np.linalg.norm(fd_eps - d_eps) <= 1e-5 * np.linalg.norm(d_eps)
            assert np.linalg.norm(fd_delta - d_delta) <= 1e-5 * np.linalg.norm(d_delta)

    def test_mixed_derivative_matches_differences(self, cfg_b, rng):
        # Second differences divide by h^2, so the truncation error grows
        # rapidly where mu is large; keep well-conditioned anchors only.
        h = 3e-5
        k0sq = cfg_b.k0**2
        done = 0
        while done < 10:
            eta, sigma = random_anchor_3d(rng, cfg_b)
            if abs(np.dot(sigma, np.cross(cfg_b.nu, eta - sigma))) < 0.15 * cfg_b.k0**3:
                continue
            done += 1
            _, _, d_mixed = sigma_hat_derivatives(cfg_b, sigma, eta)
            w = np.zeros(3)
            corners = {
                (sd, se): newton_hat(cfg_b, eta, sigma, w, sd * h, se * h).sigma_hat
                for sd in (1, -1)
                for se in (1, -1)
            }
            fd = (corners[(1, 1)] - corners[(1, -1)] - corners[(-1, 1)] + corners[(-1, -1)]) / (
                4.0 * h * h
            )
            # the full mixed derivative has no component along the normal
            assert abs(np.dot(fd, cfg_b.nu)) <= 1e-4 * (1.0 + np.linalg.norm(fd))
            fd_tangential = fd - (np.dot(fd, sigma) / k0sq) * sigma
            np.testing.assert_allclose(fd_tangential, d_mixed, rtol=1e-4, atol=1e-6)


class TestDegeneracyIdentity:
    def test_constant_coupling_vanishes(self, cfg_b, rng):
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=0.0))
        eta, sigma = random_anchor_3d(rng, cfg_b)
        for probe in eta_probes(cfg_b, eta, sigma):
            assert abs(degeneracy_identity(cfg_b, bc, sigma, probe)) <= 1e-14

    def test_gaussian_nonzero_somewhere(self, cfg_b, rng):
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=1.0))
        eta, sigma = random_anchor_3d(rng, cfg_b)
        while not gradient_condition(bc, sigma):
            eta, sigma = random_anchor_3d(rng, cfg_b)
        values = [
            abs(degeneracy_identity(cfg_b, bc, sigma, probe))
            for probe in eta_probes(cfg_b, eta, sigma)
        ]
        assert max(values) > 1e-6
        assert det_search(cfg_b, bc, eta, sigma).found

    def test_two_evaluation_routes_agree(self, cfg_b, rng):
        """The direct coefficient form equals (2/mu^3) times the chain-rule
        form built from the closed-form sigma_hat derivatives."""
        bc = CouplingCoefficient(GaussianDensity(cfg_b, decay=0.8))
        for _ in range(20):
            eta, sigma = random_anchor_3d(rng, cfg_b)
            co = appendix_coeffs(cfg_b, sigma, eta)
            d_eps, d_delta, d_mixed = sigma_hat_derivatives(cfg_b, sigma, eta)
            der = bc.derivatives(sigma, order=2)
            chained = der.d2c(d_eps, d_delta) + der.dc(d_mixed)
            direct = degeneracy_identity(cfg_b, bc, sigma, eta)
            assert direct == pytest.approx(2.0 / co.mu**3 * chained, rel=1e-10, abs=1e-12)


class TestEtaProbes:
    def test_probes_are_valid_receivers(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        probes = eta_probes(cfg_b, eta, sigma)
        assert len(probes) >= 16
        for p in probes:
            assert abs(np.linalg.norm(p) - cfg_b.k0) <= 1e-12
            assert p[-1] > 0.0
            appendix_coeffs(cfg_b, sigma, p)  # must not raise

    def test_deterministic(self, cfg_b, rng):
        eta, sigma = random_anchor_3d(rng, cfg_b)
        a = eta_probes(cfg_b, eta, sigma)
        b = eta_probes(cfg_b, eta, sigma)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
