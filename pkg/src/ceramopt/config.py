"""JSON run configuration for the command-line driver.

Every section is a plain JSON object; unknown keys raise :class:`ConfigError`
so typos in physical parameters never pass silently. Units are metadata: the
declared system is echoed into every output but nothing is converted.

Minimal example::

    {
      "scenario": {"name": "rectangle", "length": 2.0, "height": 1.0, "n_stations": 4},
      "material": {"young": 3.0e5, "poisson": 0.25, "K_Ic": 5.0},
      "load": {"g": [100.0, 0.0]},
      "measure": {"kind": "weibull", "m": 5.0, "sigma0": 150.0}
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .elasticity import DirichletSpec, LoadCase, MaterialParams, StressField
from .errors import ConfigError, GeometryError, InvalidDesign
from .fracture import CrackSizeMeasure, PowerLawMeasure, TabulatedMeasure, WeibullMeasure
from .geometry import (AdmissibilityConstants, BoxScenario, DesignVector, Mesh,
                       RectangleScenario, generate_mesh, single_simplex_mesh)
from .reliability import DEFAULT_ORDER
from .shapeopt import OptimizationConfig

STRESS_UNITS = ("MPa", "Pa", "kPa", "GPa")
LENGTH_UNITS = ("m", "mm")
BOUNDARY_KINDS = ("clamped", "roller")

_TOP_KEYS = {"scenario", "units", "material", "load", "stress", "boundary", "measure",
             "quadrature_order", "resolution", "optimizer", "admissibility", "mc", "hazard",
             "seed", "output_dir"}


def _check_keys(section: dict, allowed, where: str, required=()) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    missing = [k for k in required if k not in section]
    if missing:
        raise ConfigError(f"missing key(s) in {where}: {', '.join(missing)}")


def _number(section: dict, key: str, where: str, positive: bool = False, default=None) -> float:
    v = section.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key} must be a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key} must be positive, got {v!r}")
    return float(v)


def _integer(section: dict, key: str, where: str, default=None, minimum: int = 1) -> int:
    v = section.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{where}.{key} must be an integer >= {minimum}, got {v!r}")
    return v


def _vector(v, where: str, dim: Optional[int] = None) -> np.ndarray:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} must be numeric") from exc
    if not np.isfinite(a).all():
        raise ConfigError(f"{where} contains non-finite values")
    if dim is not None and a.shape[-1:] != (dim,):
        raise ConfigError(f"{where} must have trailing dimension {dim}, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class MeshFixture:
    """A single simplex instead of a scenario family (analytic checks)."""

    dim: int
    volume: float
    name: str = "single_simplex"

    def mesh(self) -> Mesh:
        return single_simplex_mesh(self.dim, self.volume)


@dataclass
class RunConfig:
    scenario: object
    params: Optional[np.ndarray]
    k_ic: float
    material: Optional[MaterialParams] = None
    load: LoadCase = field(default_factory=LoadCase)
    stress: Optional[np.ndarray] = None
    boundary: str = "clamped"
    measure: Optional[CrackSizeMeasure] = None
    measure_spec: dict = field(default_factory=dict)
    units: dict = field(default_factory=lambda: {"stress": "MPa", "length": "m"})
    quadrature_order: int = DEFAULT_ORDER
    resolution: int = 8
    optimizer: Optional[OptimizationConfig] = None
    admissibility: Optional[AdmissibilityConstants] = None
    n_trials: int = 10000
    safety: float = 1.0
    kappa_grid: np.ndarray = field(default_factory=lambda: np.geomspace(1e-2, 1e2, 41))
    seed: int = 0
    output_dir: Path = Path("out")

    @property
    def dim(self) -> int:
        return self.scenario.dim

    @property
    def is_fixture(self) -> bool:
        return isinstance(self.scenario, MeshFixture)

    def design(self) -> DesignVector:
        if self.is_fixture:
            raise ConfigError("a single-simplex fixture has no design parameters")
        return self.scenario.design(self.params)

    def build_mesh(self) -> Mesh:
        if self.is_fixture:
            return self.scenario.mesh()
        return generate_mesh(self.design(), self.resolution)

    def require_material(self) -> MaterialParams:
        if self.material is None:
            raise ConfigError("material needs lambda/mu or young/poisson for a displacement solve")
        return self.material

    def require_measure(self) -> CrackSizeMeasure:
        if self.measure is None:
            raise ConfigError("this command needs a 'measure' section")
        return self.measure

    def dirichlet(self, mesh: Mesh) -> DirichletSpec:
        if self.boundary == "roller":
            return DirichletSpec.roller(mesh)
        return DirichletSpec.clamped(mesh)

    def stress_field(self, mesh: Mesh) -> Optional[StressField]:
        """Prescribed element-constant stress, broadcast to every element, or ``None``."""
        if self.stress is None:
            return None
        t = np.broadcast_to(self.stress, (mesh.n_elements, self.dim, self.dim)).copy()
        return StressField(t)

    def echo(self) -> dict:
        """Short description of the run, embedded in every output document."""
        return {
            "scenario": getattr(self.scenario, "name", "?"),
            "units": dict(self.units),
            "resolution": self.resolution,
            "quadrature_order": self.quadrature_order,
            "seed": self.seed,
        }


def _parse_scenario(sec: dict):
    where = "scenario"
    name = sec.get("name")
    if name == "rectangle":
        _check_keys(sec, {"name", "length", "height", "n_stations", "lower_offset",
                          "upper_offset", "params"}, where)
        d = RectangleScenario()
        sc = RectangleScenario(
            length=_number(sec, "length", where, True, d.length),
            height=_number(sec, "height", where, True, d.height),
            n_stations=_integer(sec, "n_stations", where, d.n_stations),
            lower_offset=_number(sec, "lower_offset", where, default=d.lower_offset),
            upper_offset=_number(sec, "upper_offset", where, default=d.upper_offset))
    elif name == "box":
        _check_keys(sec, {"name", "lengths", "n_stations", "lower_offset", "upper_offset",
                          "params"}, where)
        d = BoxScenario()
        lengths = tuple(_vector(sec.get("lengths", d.lengths), "scenario.lengths", 3).tolist())
        if min(lengths) <= 0:
            raise ConfigError("scenario.lengths must be positive")
        ns = sec.get("n_stations", list(d.n_stations))
        if (not isinstance(ns, list) or len(ns) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in ns)):
            raise ConfigError("scenario.n_stations must be two positive integers")
        sc = BoxScenario(lengths=lengths, n_stations=tuple(ns),
                         lower_offset=_number(sec, "lower_offset", where, default=d.lower_offset),
                         upper_offset=_number(sec, "upper_offset", where, default=d.upper_offset))
    elif name == "single_simplex":
        _check_keys(sec, {"name", "dim", "volume"}, where)
        dim = _integer(sec, "dim", where, 3, minimum=2)
        if dim not in (2, 3):
            raise ConfigError("scenario.dim must be 2 or 3")
        return MeshFixture(dim, _number(sec, "volume", where, True, 1.0)), None
    else:
        raise ConfigError(f"scenario.name must be rectangle, box or single_simplex, got {name!r}")
    params = None
    if "params" in sec:
        params = _vector(sec["params"], "scenario.params")
        if params.shape != (sc.n_params,):
            raise ConfigError(f"scenario.params needs {sc.n_params} values, got {params.size}")
    return sc, params


def _parse_material(sec: dict):
    where = "material"
    _check_keys(sec, {"lambda", "mu", "young", "poisson", "K_Ic"}, where, required=("K_Ic",))
    k_ic = _number(sec, "K_Ic", where, positive=True)
    lame = {"lambda", "mu"} & set(sec)
    eng = {"young", "poisson"} & set(sec)
    if lame and eng:
        raise ConfigError("material: give either lambda/mu or young/poisson, not both")
    if lame:
        if lame != {"lambda", "mu"}:
            raise ConfigError("material needs both lambda and mu")
        return MaterialParams(_number(sec, "lambda", where, True), _number(sec, "mu", where, True),
                              k_ic), k_ic
    if eng:
        if eng != {"young", "poisson"}:
            raise ConfigError("material needs both young and poisson")
        nu = _number(sec, "poisson", where)
        if not -1 < nu < 0.5:
            raise ConfigError(f"material.poisson must lie in ]-1, 0.5[, got {nu!r}")
        mat = MaterialParams.from_engineering(_number(sec, "young", where, True), nu, k_ic)
        return mat, k_ic
    return None, k_ic


def _parse_measure(sec: dict, k_ic: float, base: Path) -> tuple[CrackSizeMeasure, dict]:
    where = "measure"
    kind = sec.get("kind")
    if kind in ("weibull", "power_law"):
        _check_keys(sec, {"kind", "m", "sigma0"}, where, required=("m", "sigma0"))
        m = _number(sec, "m", where, positive=True)
        s0 = _number(sec, "sigma0", where, positive=True)
        cls = WeibullMeasure if kind == "weibull" else PowerLawMeasure
        return cls(m, s0, k_ic), dict(sec)
    if kind == "tabulated":
        _check_keys(sec, {"kind", "file"}, where, required=("file",))
        path = Path(sec["file"])
        if not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise ConfigError(f"measure.file does not exist: {path}")
        return TabulatedMeasure.from_file(path), {"kind": "tabulated", "file": str(path)}
    raise ConfigError(f"measure.kind must be weibull, power_law or tabulated, got {kind!r}")


def _parse_optimizer(sec: dict, scenario) -> OptimizationConfig:
    names = {f.name for f in fields(OptimizationConfig)}
    _check_keys(sec, names, "optimizer")
    kw = {}
    for k, v in sec.items():
        if k == "max_iters":
            kw[k] = _integer(sec, k, "optimizer", minimum=0)
        else:
            kw[k] = _number(sec, k, "optimizer")
    kw.setdefault("volume_target", scenario.reference_volume())
    cfg = OptimizationConfig(**kw)
    cfg.validate_against(scenario)
    return cfg


def _parse_admissibility(sec: dict) -> AdmissibilityConstants:
    where = "admissibility"
    _check_keys(sec, {"theta", "l", "r", "min_thickness"}, where,
                required=("theta", "l", "r", "min_thickness"))
    vals = [_number(sec, k, where, True) for k in ("theta", "l", "r", "min_thickness")]
    try:
        return AdmissibilityConstants(*vals)
    except GeometryError as exc:
        raise ConfigError(f"admissibility: {exc}") from exc


def _default_admissibility(scenario) -> Optional[AdmissibilityConstants]:
    if isinstance(scenario, RectangleScenario):
        return AdmissibilityConstants.for_height(scenario.height)
    if isinstance(scenario, BoxScenario):
        return AdmissibilityConstants.for_height(scenario.lengths[2])
    return None


def parse_config(doc: dict, base: Path = Path(".")) -> RunConfig:
    """Validate a decoded JSON document and build a :class:`RunConfig`."""
    _check_keys(doc, _TOP_KEYS, "config", required=("scenario", "material"))
    try:
        scenario, params = _parse_scenario(doc["scenario"])
    except InvalidDesign:
        raise
    except GeometryError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    material, k_ic = _parse_material(doc["material"])
    dim = scenario.dim
    cfg = RunConfig(scenario=scenario, params=params, k_ic=k_ic, material=material)

    units = doc.get("units", {})
    _check_keys(units, {"stress", "length"}, "units")
    cfg.units = {"stress": units.get("stress", "MPa"), "length": units.get("length", "m")}
    if cfg.units["stress"] not in STRESS_UNITS:
        raise ConfigError(f"units.stress must be one of {STRESS_UNITS}")
    if cfg.units["length"] not in LENGTH_UNITS:
        raise ConfigError(f"units.length must be one of {LENGTH_UNITS}")

    if "load" in doc:
        _check_keys(doc["load"], {"f", "g"}, "load")
        f = doc["load"].get("f")
        g = doc["load"].get("g")
        cfg.load = LoadCase(None if f is None else _vector(f, "load.f", dim),
                            None if g is None else _vector(g, "load.g", dim))
    if "stress" in doc:
        s = _vector(doc["stress"], "stress")
        if s.shape != (dim, dim) or not np.allclose(s, s.T, rtol=0, atol=1e-12 * max(1.0, np.abs(s).max())):
            raise ConfigError(f"stress must be a symmetric {dim}x{dim} matrix")
        cfg.stress = s
    cfg.boundary = doc.get("boundary", "clamped")
    if cfg.boundary not in BOUNDARY_KINDS:
        raise ConfigError(f"boundary must be one of {BOUNDARY_KINDS}, got {cfg.boundary!r}")
    if "measure" in doc:
        cfg.measure, cfg.measure_spec = _parse_measure(doc["measure"], k_ic, base)
    if "quadrature_order" in doc:
        cfg.quadrature_order = _integer(doc, "quadrature_order", "config")
    if "resolution" in doc:
        cfg.resolution = _integer(doc, "resolution", "config")
    if "seed" in doc:
        cfg.seed = _integer(doc, "seed", "config", minimum=0)
    if "output_dir" in doc:
        if not isinstance(doc["output_dir"], str):
            raise ConfigError("output_dir must be a string")
        cfg.output_dir = Path(doc["output_dir"])
    if not cfg.is_fixture:
        cfg.design()  # bounds check now rather than mid-run
        cfg.optimizer = _parse_optimizer(doc.get("optimizer", {}), scenario)
        cfg.admissibility = (_parse_admissibility(doc["admissibility"]) if "admissibility" in doc
                             else _default_admissibility(scenario))
    elif "optimizer" in doc or "admissibility" in doc:
        raise ConfigError("optimizer/admissibility sections need a scenario family, not a fixture")
    if "mc" in doc:
        mc = doc["mc"]
        _check_keys(mc, {"n_trials", "safety"}, "mc")
        cfg.n_trials = _integer(mc, "n_trials", "mc", cfg.n_trials)
        cfg.safety = _number(mc, "safety", "mc", default=cfg.safety)
        if not 0 < cfg.safety <= 1:
            raise ConfigError("mc.safety must lie in ]0, 1]")
    if "hazard" in doc:
        hz = doc["hazard"]
        _check_keys(hz, {"kappa_min", "kappa_max", "n"}, "hazard")
        lo = _number(hz, "kappa_min", "hazard", True, 1e-2)
        hi = _number(hz, "kappa_max", "hazard", True, 1e2)
        if not lo < hi:
            raise ConfigError("hazard.kappa_min must be below hazard.kappa_max")
        cfg.kappa_grid = np.geomspace(lo, hi, _integer(hz, "n", "hazard", 41, minimum=2))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc, base=path.parent)
