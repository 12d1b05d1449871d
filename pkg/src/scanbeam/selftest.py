"""Fast cross-module invariant checks, runnable from the CLI and service.

Each check returns a row ``(name, passed, detail)``. The suite is seeded,
finishes in a few seconds, and touches every layer: reflection algebra,
coupling reciprocity, representation identities, graph classification,
certificates, simulated measurements, and the dimension-specific solvers.
"""

import dataclasses

import numpy as np

from .coupling_sets import membership_flags, sphere_pair_representations
from .forward import (
    GaussianBlob,
    Phantom,
    SimulatedSource,
    nonuniqueness_certificate,
    phantom_fourier,
    reconstruct_point,
    simulate_reduced,
)
from .geometry import ScanConfig, SigmaClass, householder_reflect
from .graph2d import build_component, classify_sigma, component_system
from .herglotz import CouplingCoefficient, GaussianDensity
from .highdim import level_scan, solve_pair
from .uniqueness3d import det_search, local_system

SEED = 1789


@dataclasses.dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _cfg2d():
    return ScanConfig(d=2, k0=1.0, omega=(1.0, 0.0), nu=(-0.5, np.sqrt(3.0) / 2.0))


def _cfg_cycle():
    return ScanConfig(d=2, k0=1.0, omega=(1.0, 0.0), nu=(np.sqrt(2.0) / 2.0, np.sqrt(2.0) / 2.0))


def _cfg3d():
    return ScanConfig(d=3, k0=1.0, omega=(0.0, 0.0, 1.0), nu=(0.0, np.sqrt(2.0) / 2.0, np.sqrt(2.0) / 2.0))


def _cfg4d():
    return ScanConfig(d=4, k0=1.0, omega=(0.0, 0.0, 0.0, 1.0), nu=(0.0, 0.0, np.sqrt(2.0) / 2.0, np.sqrt(2.0) / 2.0))


def _hemisphere_point(rng, cfg, v):
    while True:
        x = rng.standard_normal(cfg.d)
        n = np.linalg.norm(x)
        if n < 1e-6:
            continue
        x *= cfg.k0 / n
        if x @ v < 0.0:
            x = -x
        if abs(x @ v) > 1e-3 * cfg.k0:
            return x


def _sigma_of_class(rng, cfg, want):
    while True:
        s = _hemisphere_point(rng, cfg, cfg.omega)
        if classify_sigma(cfg, s) is want:
            return s


def check_reflection_involution():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for d in (2, 3, 4):
        nu = rng.standard_normal(d)
        nu /= np.linalg.norm(nu)
        for _ in range(50):
            x = rng.standard_normal(d)
            hx = householder_reflect(nu, x)
            worst = max(worst, np.linalg.norm(householder_reflect(nu, hx) - x))
            worst = max(worst, abs(np.linalg.norm(hx) - np.linalg.norm(x)))
    return CheckResult("reflection_involution", worst <= 1e-12, f"max deviation {worst:.3e}")


def check_coupling_reciprocity():
    cfg = _cfg2d()
    bc = CouplingCoefficient(GaussianDensity(cfg, decay=1.0))
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for _ in range(100):
        s = _sigma_of_class(rng, cfg, SigmaClass.SIGMA2)
        worst = max(worst, abs(bc(s) * bc(householder_reflect(cfg.nu, s)) - 1.0))
    return CheckResult("coupling_reciprocity", worst <= 1e-10, f"max |b(s)b(Hs)-1| = {worst:.3e}")


def check_representations():
    cfg = _cfg2d()
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    count = 0
    for _ in range(100):
        sigma = _hemisphere_point(rng, cfg, cfg.omega)
        eta = _hemisphere_point(rng, cfg, cfg.e_last)
        y = eta - sigma
        for eta_r, sigma_r, _ in sphere_pair_representations(cfg, y):
            count += 1
            worst = max(worst, np.linalg.norm((eta_r - sigma_r) - y))
            worst = max(worst, abs(np.linalg.norm(eta_r) - cfg.k0))
            worst = max(worst, abs(np.linalg.norm(sigma_r) - cfg.k0))
    detail = f"{count} representations, max defect {worst:.3e}"
    return CheckResult("representation_identity", count > 0 and worst <= 1e-9, detail)


def check_component_census():
    cfg = _cfg_cycle()
    rng = np.random.default_rng(SEED + 3)
    bc = CouplingCoefficient(GaussianDensity(cfg, decay=1.0))
    bad = 0
    cycles = 0
    for _ in range(50):
        sigma = _sigma_of_class(rng, cfg, SigmaClass.SIGMA2)
        eta = _hemisphere_point(rng, cfg, cfg.e_last)
        flags = membership_flags(cfg, eta - sigma)
        if not flags.nondegenerate:
            continue
        comp = build_component(cfg, eta - sigma)
        system = component_system(cfg, comp, bc)
        k = len(system.kernel)
        rank = np.linalg.matrix_rank(np.asarray(system.matrix))
        if k != len(comp.vertices) - rank:
            bad += 1
        for vec in system.kernel:
            if np.max(np.abs(np.asarray(system.matrix) @ vec)) > 1e-10:
                bad += 1
        if comp.shape.value == "four_vertex_cycle":
            cycles += 1
            if k != 1:
                bad += 1
    detail = f"{cycles} cycles seen, {bad} rank or residual mismatches"
    return CheckResult("component_kernel_dims", bad == 0, detail)


def check_cycle_certificate():
    cfg = _cfg_cycle()
    bc = CouplingCoefficient(GaussianDensity(cfg, decay=1.0))
    eta = cfg.k0 * np.array([np.cos(np.radians(130.0)), np.sin(np.radians(130.0))])
    sigma = cfg.k0 * np.array([np.cos(np.radians(-35.0)), np.sin(np.radians(-35.0))])
    comp = build_component(cfg, eta - sigma)
    try:
        witness = nonuniqueness_certificate(cfg, bc, comp)
    except Exception as exc:
        return CheckResult("cycle_certificate", False, f"raised {type(exc).__name__}: {exc}")
    return CheckResult("cycle_certificate", True, f"support size {len(witness.support)}")


def check_measurement_linearity():
    cfg = _cfg2d()
    density = GaussianDensity(cfg, decay=1.0)
    rng = np.random.default_rng(SEED + 4)
    blob_a = GaussianBlob(width=1.0)
    blob_b = GaussianBlob(width=0.7, amplitude=0.5 - 0.2j, center=np.array([0.4, 0.1]))
    both = Phantom((blob_a, blob_b))
    worst = 0.0
    for _ in range(20):
        sigma = _hemisphere_point(rng, cfg, cfg.omega)
        eta = _hemisphere_point(rng, cfg, cfg.e_last)
        ma = simulate_reduced(cfg, density, blob_a, eta, sigma).value
        mb = simulate_reduced(cfg, density, blob_b, eta, sigma).value
        mab = simulate_reduced(cfg, density, both, eta, sigma).value
        worst = max(worst, abs(mab - (ma + mb)))
    return CheckResult("measurement_linearity", worst <= 1e-12, f"max additivity defect {worst:.3e}")


def check_direct_roundtrip():
    cfg = _cfg2d()
    density = GaussianDensity(cfg, decay=1.0)
    bc = CouplingCoefficient(density)
    ph = GaussianBlob(width=1.0, amplitude=1.0 + 0.5j, center=np.array([0.2, -0.3]))
    source = SimulatedSource(cfg, density, ph)
    rng = np.random.default_rng(SEED + 5)
    worst = 0.0
    for _ in range(20):
        sigma = _sigma_of_class(rng, cfg, SigmaClass.SIGMA1)
        eta = _hemisphere_point(rng, cfg, cfg.e_last)
        y = eta - sigma
        result = reconstruct_point(cfg, bc, source, y)
        if result.status.value != "value":
            return CheckResult("direct_roundtrip", False, f"status {result.status.value} at {y}")
        truth = phantom_fourier(ph, y)
        worst = max(worst, abs(result.value - truth) / max(1e-30, abs(truth)))
    return CheckResult("direct_roundtrip", worst <= 1e-9, f"max relative error {worst:.3e}")


def check_local_solver_3d():
    cfg = _cfg3d()
    density = GaussianDensity(cfg, decay=1.0)
    bc = CouplingCoefficient(density)
    ph = GaussianBlob(width=1.0)
    source = SimulatedSource(cfg, density, ph)
    rng = np.random.default_rng(SEED + 6)
    for _ in range(10):
        sigma = _sigma_of_class(rng, cfg, SigmaClass.SIGMA2)
        eta = _hemisphere_point(rng, cfg, cfg.e_last)
        if not bc.gradient_condition(sigma):
            continue
        search = det_search(cfg, bc, eta, sigma)
        if not search.found:
            return CheckResult("local_solver_3d", False, f"search stalled, |det| = {search.abs_det:.3e}")
        system = local_system(cfg, bc, eta, sigma, search.w, search.delta, search.epsilon, source=source)
        solved = np.linalg.solve(system.matrix, system.rhs)
        worst = 0.0
        for point, value in zip(system.points, solved):
            truth = phantom_fourier(ph, point)
            worst = max(worst, abs(value - truth) / max(1e-30, abs(truth)))
        ok = worst <= 1e-6
        return CheckResult("local_solver_3d", ok, f"|det| = {search.abs_det:.3e}, max relative error {worst:.3e}")
    return CheckResult("local_solver_3d", False, "no anchor with usable gradient found")


def check_pair_solver_4d():
    cfg = _cfg4d()
    bc = CouplingCoefficient(GaussianDensity(cfg, decay=1.0))
    rng = np.random.default_rng(SEED + 7)
    for _ in range(10):
        sigma = _sigma_of_class(rng, cfg, SigmaClass.SIGMA2)
        eta = _hemisphere_point(rng, cfg, cfg.e_last)
        result = level_scan(cfg, bc, eta - sigma)
        if not result.found:
            continue
        gy, gz = solve_pair(bc, result.sigma, result.sigma_hat, (0.0 + 0.0j, 0.0 + 0.0j))
        if gy != 0.0 or gz != 0.0:
            return CheckResult("pair_solver_4d", False, f"homogeneous solve returned ({gy}, {gz})")
        return CheckResult("pair_solver_4d", True, f"gap {result.gap:.3e} at level {result.lam:.3f}")
    return CheckResult("pair_solver_4d", False, "no discriminating pair found in 10 draws")


ALL_CHECKS = (
    check_reflection_involution,
    check_coupling_reciprocity,
    check_representations,
    check_component_census,
    check_cycle_certificate,
    check_measurement_linearity,
    check_direct_roundtrip,
    check_local_solver_3d,
    check_pair_solver_4d,
)


def run_selftest():
    """Run every check; returns the list of :class:`CheckResult` rows."""
    rows = []
    for check in ALL_CHECKS:
        try:
            rows.append(check())
        except Exception as exc:
            name = check.__name__.removeprefix("check_")
            rows.append(CheckResult(name, False, f"raised {type(exc).__name__}: {exc}"))
    return rows
