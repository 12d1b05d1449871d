"""Subcommand implementations shared by the CLI and the HTTP service.

Each operation takes a validated :class:`~scanbeam.runconfig.RunConfig`
plus its own parameters and returns an :class:`OpResult`: named text
artifacts ready to be written to disk (or shipped over HTTP), a JSON-able
summary, and the exit code the CLI should end with. Code 0 is success;
4 flags honest "nothing there" outcomes (no discriminating parameters, no
pair with a usable gap) that produced a diagnostic artifact anyway.
"""

import dataclasses

import numpy as np

from .coupling_sets import CouplingKind, RegionLabel, coupling_set, membership_flags, region_map
from .errors import (
    ConfigError,
    DegenerateAnchor,
    DegenerateVertex,
    DimensionMismatch,
    EmptyCouplingSet,
    InvalidDirection,
    InvalidSlice,
    InvalidSpherePoint,
    OutsideBeamSupport,
    OutsideDomain,
)
from .forward import (
    SimulatedSource,
    nonuniqueness_certificate,
    phantom_fourier,
    reconstruct_grid,
    sample_reduced,
    verify_certificate_forward,
    witness_equation_residuals,
)
from .geometry import snap_to_sphere
from .graph2d import build_component, component_system
from .highdim import level_scan, solve_pair
from .selftest import run_selftest
from .serialize import (
    component_dict,
    fourier_field_csv,
    measurements_csv,
    region_map_csv,
    region_map_pgm,
    to_json,
    witness_dict,
)
from .uniqueness3d import det_search, local_system

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NOTFOUND = 4

CONFIG_ERRORS = (ConfigError, InvalidDirection, InvalidSpherePoint, DimensionMismatch, InvalidSlice)
NOTFOUND_ERRORS = (EmptyCouplingSet, OutsideDomain, OutsideBeamSupport, DegenerateVertex, DegenerateAnchor)


def classify_error(exc):
    """Exit code for a domain exception: bad input 2, nothing there 4,
    any other numerical failure 3."""
    if isinstance(exc, CONFIG_ERRORS):
        return EXIT_CONFIG
    if isinstance(exc, NOTFOUND_ERRORS):
        return EXIT_NOTFOUND
    return EXIT_NUMERICAL


@dataclasses.dataclass(frozen=True)
class OpResult:
    artifacts: dict
    summary: dict
    code: int = EXIT_OK


def _parse_point(text, d):
    try:
        parts = [float(p) for p in text.split(",")]
    except (ValueError, AttributeError) as exc:
        raise ConfigError(f"point must be comma-separated floats, got {text!r}") from exc
    if len(parts) != d:
        raise ConfigError(f"point has {len(parts)} coordinates, expected {d}")
    return np.array(parts, dtype=float)


def op_regions(rc, threads=1):
    cfg = rc.scan_config()
    bc = rc.build_coupling(cfg)
    rm = region_map(cfg, rc.grid.n, bc=bc, slice_spec=rc.slice_spec(cfg), threads=threads)
    counts = {label.name.lower(): int(np.sum(rm.labels == int(label))) for label in RegionLabel}
    artifacts = {"regions.csv": region_map_csv(rm), "regions.pgm": region_map_pgm(rm)}
    return OpResult(artifacts, {"n": rm.n, "k0": rm.k0, "label_counts": counts})


def op_graph(rc, point):
    cfg = rc.scan_config()
    if cfg.d != 2:
        raise ConfigError("the coupling graph is a planar construction; use a 2-dimensional scan")
    y = _parse_point(point, cfg.d)
    bc = rc.build_coupling(cfg)
    comp = build_component(cfg, y)
    system = component_system(cfg, comp, bc)
    summary = {
        "shape": comp.shape.value,
        "vertices": len(comp.vertices),
        "kernel_dim": len(system.kernel),
        "case_fired": comp.case_fired,
    }
    return OpResult({"component.json": to_json(component_dict(comp, system))}, summary)


def op_simulate(rc, count=200):
    if count < 1:
        raise ConfigError(f"measurement count must be positive, got {count}")
    cfg = rc.scan_config()
    density = rc.build_density(cfg)
    ph = rc.build_phantom()
    measurements = sample_reduced(cfg, density, ph, count, seed=rc.seed)
    branches = {}
    for m in measurements:
        branches[m.branch.value] = branches.get(m.branch.value, 0) + 1
    summary = {"count": len(measurements), "branches": branches, "seed": rc.seed}
    return OpResult({"measurements.csv": measurements_csv(measurements)}, summary)


def op_reconstruct(rc, threads=1):
    cfg = rc.scan_config()
    bc = rc.build_coupling(cfg)
    ph = rc.build_phantom()
    field, rm = reconstruct_grid(cfg, bc, ph, rc.grid.n, slice_spec=rc.slice_spec(cfg), threads=threads)
    status_counts = {}
    for status in field.statuses:
        status_counts[status.value] = status_counts.get(status.value, 0) + 1
    report = {
        "n": field.n,
        "k0": field.k0,
        "max_rel_error": None if field.max_rel_error is None else float(field.max_rel_error),
        "status_counts": status_counts,
    }
    artifacts = {"field.csv": fourier_field_csv(field), "report.json": to_json(report)}
    return OpResult(artifacts, report)


def op_certify(rc, point, pairs=100):
    cfg = rc.scan_config()
    if cfg.d != 2:
        raise ConfigError("certificates are a planar construction; use a 2-dimensional scan")
    y = _parse_point(point, cfg.d)
    bc = rc.build_coupling(cfg)
    ph = rc.build_phantom()
    comp = build_component(cfg, y)
    witness = nonuniqueness_certificate(cfg, bc, comp)
    audit = witness_equation_residuals(cfg, bc, witness)
    agreement = verify_certificate_forward(cfg, bc, ph, witness, pairs=pairs, seed=rc.seed)
    artifact = to_json(witness_dict(witness, audit=audit, agreement=agreement))
    summary = {
        "support": len(witness.support),
        "equations": int(audit.equations),
        "max_residual": float(audit.max_residual),
        "forward_pairs": int(agreement.pairs),
        "forward_max_difference": float(agreement.max_difference),
        "passed": bool(agreement.passed),
    }
    code = EXIT_OK if agreement.passed else EXIT_NUMERICAL
    return OpResult({"witness.json": artifact}, summary, code)


def _coupled_rep(cfg, y):
    cs = coupling_set(cfg, y)
    if cs.kind is not CouplingKind.LAMBDA_INTERVALS or cs.arcs is None or cs.arcs.is_empty:
        raise EmptyCouplingSet(f"no coupled representation at {np.asarray(y).tolist()}")
    spans = [(b - a, 0.5 * (a + b)) for a, b in cs.arcs.intervals]
    theta = max(spans)[1]
    sigma = cs.frame.point(theta)
    eta = snap_to_sphere(cfg, sigma + np.asarray(y, dtype=float))
    return eta, sigma


def op_check3d(rc, anchor):
    cfg = rc.scan_config()
    if cfg.d != 3:
        raise ConfigError("the shifted-system diagnostic needs a 3-dimensional scan")
    y = _parse_point(anchor, cfg.d)
    flags = membership_flags(cfg, y)
    bc = rc.build_coupling(cfg)
    density = rc.build_density(cfg)
    ph = rc.build_phantom()
    eta, sigma = _coupled_rep(cfg, y)
    search = det_search(cfg, bc, eta, sigma, radius=rc.tolerances.nbhd_radius * cfg.k0)
    found = bool(search.found and search.abs_det > rc.tolerances.det_tol)
    diag = {
        "anchor": y.tolist(),
        "in_direct_region": bool(flags.in_y1),
        "eta": np.asarray(eta).tolist(),
        "sigma": np.asarray(sigma).tolist(),
        "found": found,
        "abs_det": float(search.abs_det),
        "det_tol": rc.tolerances.det_tol,
        "radius": float(search.radius),
        "evaluations": int(search.evaluations),
    }
    if found:
        source = SimulatedSource(cfg, density, ph)
        system = local_system(cfg, bc, eta, sigma, search.w, search.delta, search.epsilon, source=source)
        solution = np.linalg.solve(system.matrix, system.rhs)
        errors = []
        for p, v in zip(system.points, solution):
            truth = phantom_fourier(ph, p)
            errors.append(abs(complex(v) - truth) / max(np.finfo(float).tiny, abs(truth)))
        diag.update(
            {
                "w": np.asarray(search.w).tolist(),
                "delta": float(search.delta),
                "epsilon": float(search.epsilon),
                "solved_points": [np.asarray(p).tolist() for p in system.points],
                "max_rel_error_vs_phantom": float(max(errors)),
            }
        )
    summary = {k: diag[k] for k in ("found", "abs_det", "evaluations")}
    if found:
        summary["max_rel_error_vs_phantom"] = diag["max_rel_error_vs_phantom"]
    code = EXIT_OK if found else EXIT_NOTFOUND
    return OpResult({"check3d.json": to_json(diag)}, summary, code)


def op_checkhd(rc, dim=None, point=None):
    cfg = rc.scan_config()
    if cfg.d < 4:
        raise ConfigError("the level-sphere diagnostic needs a scan of dimension 4 or higher")
    if dim is not None and dim != cfg.d:
        raise ConfigError(f"--dim {dim} disagrees with the configured dimension {cfg.d}")
    bc = rc.build_coupling(cfg)
    if point is not None:
        y = _parse_point(point, cfg.d)
    else:
        rng = np.random.default_rng(rc.seed)
        eta = _sample_hemisphere(rng, cfg, cfg.e_last)
        sigma = _sample_hemisphere(rng, cfg, cfg.omega)
        y = eta - sigma
    result = level_scan(cfg, bc, y, pair_tol=rc.tolerances.pair_tol)
    diag = {
        "point": y.tolist(),
        "found": bool(result.found),
        "gap": float(result.gap),
        "level": float(result.lam),
        "pair_tol": float(result.pair_tol),
        "admissible_probes": int(result.admissible),
    }
    if result.found:
        zero = solve_pair(bc, result.sigma, result.sigma_hat, (0.0 + 0.0j, 0.0 + 0.0j))
        diag.update(
            {
                "sigma": np.asarray(result.sigma).tolist(),
                "sigma_hat": np.asarray(result.sigma_hat).tolist(),
                "homogeneous_solution": [_complex_pair(z) for z in zero],
                "homogeneous_exact_zero": bool(zero[0] == 0.0 and zero[1] == 0.0),
            }
        )
    summary = {k: diag[k] for k in ("found", "gap", "level")}
    code = EXIT_OK if result.found else EXIT_NOTFOUND
    return OpResult({"checkhd.json": to_json(diag)}, summary, code)


def _complex_pair(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _sample_hemisphere(rng, cfg, v):
    while True:
        x = rng.standard_normal(cfg.d)
        n = np.linalg.norm(x)
        if n < 1e-6:
            continue
        x *= cfg.k0 / n
        if float(x @ v) < 0.0:
            x = -x
        if abs(float(x @ v)) > 1e-3 * cfg.k0:
            return x


def op_selftest():
    rows = run_selftest()
    passed = all(r.passed for r in rows)
    diag = {
        "passed": passed,
        "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in rows],
    }
    summary = {"passed": passed, "checks": len(rows), "failed": sum(1 for r in rows if not r.passed)}
    code = EXIT_OK if passed else EXIT_NUMERICAL
    return OpResult({"selftest.json": to_json(diag)}, summary, code)
