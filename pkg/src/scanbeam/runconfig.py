"""Strict run configuration: one JSON document drives every subcommand.

The document has five sections plus a seed. Unknown keys are rejected
everywhere, so typos fail loudly instead of silently running defaults.
Directions can be given as unit vectors or, in dimensions 2 and 3, as
angles in degrees through the ``_deg`` variants (a single angle in the
plane, a ``[polar, azimuth]`` pair in space).

Example::

    {
      "scan": {"d": 2, "k0": 1.0, "omega_deg": 0.0, "nu_deg": 120.0},
      "density": {"kind": "gaussian", "decay": 1.0},
      "phantom": [{"width": 1.0, "amplitude_re": 1.0, "center": [0.3, -0.2]}],
      "grid": {"n": 65},
      "tolerances": {"det_tol": 1e-10},
      "seed": 7
    }
"""

import json
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .coupling_sets import SliceSpec
from .errors import ConfigError
from .forward import GaussianBlob, Phantom
from .geometry import ScanConfig
from .herglotz import CouplingCoefficient, GaussianDensity, TabulatedDensity


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _unit_2d(deg):
    t = math.radians(deg)
    return (math.cos(t), math.sin(t))


def _unit_3d(polar_deg, azimuth_deg):
    t = math.radians(polar_deg)
    p = math.radians(azimuth_deg)
    return (math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t))


class ScanSection(_Section):
    d: int = Field(ge=2, le=6)
    k0: float = Field(default=1.0, gt=0.0)
    omega: tuple[float, ...] | None = None
    omega_deg: float | tuple[float, float] | None = None
    nu: tuple[float, ...] | None = None
    nu_deg: float | tuple[float, float] | None = None
    chi: float = Field(default=0.5, gt=0.0, lt=1.0)

    def direction(self, name):
        vec = getattr(self, name)
        deg = getattr(self, name + "_deg")
        if (vec is None) == (deg is None):
            raise ConfigError(f"scan: give exactly one of {name} or {name}_deg")
        if vec is not None:
            if len(vec) != self.d:
                raise ConfigError(f"scan.{name} has {len(vec)} entries for dimension {self.d}")
            return vec
        if self.d == 2:
            if not isinstance(deg, float):
                raise ConfigError(f"scan.{name}_deg must be a single angle in dimension 2")
            return _unit_2d(deg)
        if self.d == 3:
            if isinstance(deg, float):
                raise ConfigError(f"scan.{name}_deg must be [polar, azimuth] in dimension 3")
            return _unit_3d(*deg)
        raise ConfigError(f"scan.{name}_deg is only available in dimensions 2 and 3; use a vector")


class DensitySection(_Section):
    kind: str = "gaussian"
    decay: float | None = None
    path: str | None = None

    def build(self, cfg):
        if self.kind == "gaussian":
            if self.path is not None:
                raise ConfigError("density.path applies to the tabulated kind only")
            decay = 1.0 if self.decay is None else self.decay
            if decay < 0.0:
                raise ConfigError(f"density.decay must be nonnegative, got {decay}")
            return GaussianDensity(cfg, decay=decay)
        if self.kind == "tabulated":
            if self.decay is not None:
                raise ConfigError("density.decay applies to the gaussian kind only")
            if self.path is None:
                raise ConfigError("density.path is required for the tabulated kind")
            return TabulatedDensity.from_csv(cfg, self.path)
        raise ConfigError(f"unknown density kind {self.kind!r}")


class BlobSection(_Section):
    width: float = Field(gt=0.0)
    amplitude_re: float = 1.0
    amplitude_im: float = 0.0
    center: tuple[float, ...] | None = None

    def build(self, d):
        center = None
        if self.center is not None:
            if len(self.center) != d:
                raise ConfigError(f"phantom blob center has {len(self.center)} entries for dimension {d}")
            center = np.array(self.center, dtype=float)
        return GaussianBlob(
            width=self.width,
            amplitude=complex(self.amplitude_re, self.amplitude_im),
            center=center,
        )


class SliceSection(_Section):
    origin: tuple[float, ...]
    u: tuple[float, ...]
    v: tuple[float, ...]


class GridSection(_Section):
    n: int = Field(default=65, ge=2)
    slice: SliceSection | None = None


class TolerancesSection(_Section):
    """Numerical knobs, all strictly positive.

    ``tol`` feeds the scan geometry's membership tests; ``cond_tol`` is the
    gradient non-degeneracy threshold; ``det_tol`` the local determinant
    acceptance level; ``pair_tol`` the level-sphere pair separation;
    ``nbhd_radius`` the parameter search radius relative to k0.
    """

    tol: float = Field(default=1e-12, gt=0.0)
    cond_tol: float = Field(default=1e-8, gt=0.0)
    det_tol: float = Field(default=1e-10, gt=0.0)
    pair_tol: float = Field(default=1e-8, gt=0.0)
    nbhd_radius: float = Field(default=0.05, gt=0.0)


class RunConfig(_Section):
    scan: ScanSection
    density: DensitySection = DensitySection()
    phantom: tuple[BlobSection, ...] = (BlobSection(width=1.0),)
    grid: GridSection = GridSection()
    tolerances: TolerancesSection = TolerancesSection()
    seed: int = 0

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"config rejected: {exc}") from exc

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(text)

    def scan_config(self):
        return ScanConfig(
            d=self.scan.d,
            k0=self.scan.k0,
            omega=self.scan.direction("omega"),
            nu=self.scan.direction("nu"),
            chi=self.scan.chi,
            tol=self.tolerances.tol,
        )

    def build_density(self, cfg):
        return self.density.build(cfg)

    def build_coupling(self, cfg):
        return CouplingCoefficient(self.build_density(cfg), cond_tol=self.tolerances.cond_tol)

    def build_phantom(self):
        return Phantom(tuple(blob.build(self.scan.d) for blob in self.phantom))

    def slice_spec(self, cfg):
        if self.grid.slice is None:
            return None
        if cfg.d == 2:
            raise ConfigError("grid.slice applies to dimensions 3 and above")
        s = self.grid.slice
        for name, vec in (("origin", s.origin), ("u", s.u), ("v", s.v)):
            if len(vec) != cfg.d:
                raise ConfigError(f"grid.slice.{name} has {len(vec)} entries for dimension {cfg.d}")
        return SliceSpec(
            origin=np.array(s.origin, dtype=float),
            u=np.array(s.u, dtype=float),
            v=np.array(s.v, dtype=float),
        )
