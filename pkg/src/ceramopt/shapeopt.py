"""Volume-constrained minimization of the expected flaw count over scenario designs.

The merit function is ``J + w * ((volume - V) / V)**2``; ``w`` grows on a
schedule until the volume constraint holds to tolerance. Gradients are
central finite differences of the full pipeline; mesh topology is fixed
across perturbations because the meshes are mapped lattices.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .elasticity import (DirichletSpec, LoadCase, MaterialParams, compute_stress,
                         solve_state)
from .errors import ConfigError, InvalidDesign, NoAdmissibleStep
from .fracture import CrackSizeMeasure, WeibullMeasure
from .geometry import (AdmissibilityConstants, AdmissibilityReport, DesignVector, Mesh, RectangleScenario,
                       check_admissible, generate_mesh, volume)
from .reliability import OrientationQuadrature, build_quadrature, objective


@dataclass(frozen=True)
class Pipeline:
    """Everything besides the design that ``evaluate_design`` needs."""

    mat: MaterialParams
    load: LoadCase
    measure: CrackSizeMeasure
    quad: OrientationQuadrature
    resolution: int = 8
    dirichlet: Optional[DirichletSpec] = None


@dataclass(frozen=True)
class DesignEvaluation:
    J: float
    p_s: float
    volume: float
    mesh: Optional[Mesh] = field(default=None, compare=False, repr=False)


def evaluate_design(design: DesignVector, pipeline: Pipeline) -> DesignEvaluation:
    """Mesh, solve, recover stress and integrate the failure intensity."""
    mesh = generate_mesh(design, pipeline.resolution)
    u = solve_state(mesh, pipeline.mat, pipeline.load, pipeline.dirichlet)
    stress = compute_stress(mesh, pipeline.mat, u)
    rel = objective(mesh, stress, pipeline.measure, pipeline.quad, pipeline.mat.k_ic)
    return DesignEvaluation(rel.J, rel.p_s, volume(mesh), mesh)


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def gradient_fd(design: DesignVector, pipeline: Pipeline, fd_step: float = 1e-4,
                func=None, threads: int = 1) -> np.ndarray:
    """Central-difference gradient of ``func(design)`` (default: ``J``).

    The step for parameter ``i`` is ``fd_step * (upper_i - lower_i)``. A
    parameter closer than one step to a bound falls back to a one-sided
    difference on the feasible side.
    """
    if fd_step <= 0:
        raise ConfigError("fd_step must be positive")
    if func is None:
        def func(d):
            return evaluate_design(d, pipeline).J
    x = design.params
    h = fd_step * (design.upper - design.lower)
    plans = []
    for i in range(len(x)):
        up = bool(x[i] + h[i] <= design.upper[i])
        down = bool(x[i] - h[i] >= design.lower[i])
        if not (up or down) or h[i] == 0:
            raise InvalidDesign(f"parameter {i} has no room for a finite difference step")
        plans.append((i, up, down))
    points = []
    for i, up, down in plans:
        e = np.zeros_like(x)
        e[i] = h[i]
        points.append(x + e if up else x)
        points.append(x - e if down else x)
    values = _map(lambda p: func(design.with_params(p)), points, threads)
    grad = np.empty(len(x))
    for k, (i, up, down) in enumerate(plans):
        fp, fm = values[2 * k], values[2 * k + 1]
        grad[i] = (fp - fm) / (h[i] * (int(up) + int(down)))
    return grad


@dataclass(frozen=True)
class OptimizationConfig:
    volume_target: float
    volume_tol: float = 1e-3
    step0: float = 1e-2
    shrink: float = 0.5
    grow: float = 2.0
    min_step: float = 1e-10
    armijo: float = 1e-4
    fd_step: float = 1e-4
    penalty0: float = 100.0
    penalty_growth: float = 4.0
    penalty_max: float = 1e8
    max_iters: int = 50
    grad_tol: float = 1e-6

    def __post_init__(self):
        if not self.volume_target > 0:
            raise ConfigError("volume target must be positive")
        for name in ("volume_tol", "step0", "min_step", "fd_step", "grad_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.shrink < 1 or self.grow < 1:
            raise ConfigError("need 0 < shrink < 1 <= grow")
        if self.penalty0 < 0 or self.penalty_growth < 1 or self.max_iters < 0:
            raise ConfigError("invalid penalty schedule or iteration budget")

    def validate_against(self, scenario) -> None:
        """Target volume must lie strictly inside ``]0, |hold-all|[``."""
        if not 0 < self.volume_target < scenario.hold_all_volume():
            raise ConfigError(f"volume target must lie in ]0, {scenario.hold_all_volume()}[")


@dataclass
class IterationRecord:
    iteration: int
    params: np.ndarray
    J: float
    p_s: float
    volume: float
    violation: float
    step: float
    gradnorm: float
    weight: float
    merit: float
    admissible: bool


CSV_FIELDS = ("iteration", "J", "p_s", "volume", "violation", "step", "gradnorm")


@dataclass
class OptimizationTrace:
    records: list = field(default_factory=list)
    status: str = "running"
    volume_target: float = math.nan
    volume_tol: float = math.nan

    def __len__(self):
        return len(self.records)

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    @property
    def feasible(self) -> bool:
        return self.final.violation <= self.volume_tol

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS + tuple(f"x{i}" for i in range(len(self.final.params))))
        for r in self.records:
            w.writerow([r.iteration] + [f"{getattr(r, k):.17g}" for k in CSV_FIELDS[1:]]
                       + [f"{v:.17g}" for v in r.params.tolist()])
        return buf.getvalue()

    def summary(self) -> dict:
        first, last = self.records[0], self.records[-1]
        return {
            "status": self.status,
            "feasible": self.feasible,
            "iterations": len(self.records) - 1,
            "initial_J": first.J,
            "final_J": last.J,
            "final_p_s": last.p_s,
            "final_volume": last.volume,
            "volume_target": self.volume_target,
            "final_violation": last.violation,
            "final_gradnorm": last.gradnorm,
            "final_params": [float(v) for v in last.params],
            "all_admissible": all(r.admissible for r in self.records),
        }


def optimize(design0: DesignVector, config: OptimizationConfig, pipeline: Pipeline,
             consts: Optional[AdmissibilityConstants] = None, threads: int = 1,
             callback=None) -> OptimizationTrace:
    """Projected gradient descent with Armijo backtracking on the penalized merit.

    Candidates failing :func:`check_admissible` are treated like rejected
    steps. The trace status is ``"converged"`` (small projected gradient with
    the volume constraint met) or ``"max_iters"``.
    """
    config.validate_against(design0.scenario)
    V = config.volume_target

    def violation(vol):
        return abs(vol - V) / V

    def merit(ev, w):
        return ev.J + w * ((ev.volume - V) / V) ** 2

    def admissible(ev):
        return consts is None or check_admissible(ev.mesh, consts).ok

    def merit_grad(design, w):
        def f(d):
            ev = evaluate_design(d, pipeline)
            return merit(ev, w)
        return gradient_fd(design, pipeline, config.fd_step, func=f, threads=threads)

    x = design0
    ev = evaluate_design(x, pipeline)
    if not admissible(ev):
        raise InvalidDesign("initial design is not admissible")
    w = config.penalty0
    g = merit_grad(x, w)
    pg = float(np.linalg.norm(x.project(x.params - g).params - x.params))
    trace = OptimizationTrace(volume_target=V, volume_tol=config.volume_tol)
    trace.records.append(IterationRecord(0, x.params.copy(), ev.J, ev.p_s, ev.volume,
                                         violation(ev.volume), 0.0, pg, w, merit(ev, w), True))
    step = config.step0
    for it in range(1, config.max_iters + 1):
        feasible = violation(ev.volume) <= config.volume_tol
        if pg <= config.grad_tol and feasible:
            trace.status = "converged"
            return trace
        stalled = len(trace) < 2 or trace.records[-1].violation > 0.25 * trace.records[-2].violation
        if not feasible and stalled and it > 1 and w < config.penalty_max:
            w = min(w * config.penalty_growth, config.penalty_max)
            g = merit_grad(x, w)
        m0 = merit(ev, w)
        t = step
        while True:
            cand = x.project(x.params - t * g)
            moved = cand.params - x.params
            if not moved.any():
                break
            ev_c = evaluate_design(cand, pipeline)
            m_c = merit(ev_c, w)
            if m_c <= m0 + config.armijo * float(g @ moved) and admissible(ev_c):
                break
            t *= config.shrink
            if t < config.min_step:
                raise NoAdmissibleStep(f"line search exhausted at iteration {it} (step {t:.3g})")
        if not moved.any():
            # projected gradient vanishes under the current bounds
            if feasible:
                trace.status = "converged"
                return trace
            continue
        x, ev = cand, ev_c
        g_old = g
        g = merit_grad(x, w)
        pg = float(np.linalg.norm(x.project(x.params - g).params - x.params))
        trace.records.append(IterationRecord(it, x.params.copy(), ev.J, ev.p_s, ev.volume,
                                             violation(ev.volume), t, pg, w, m_c, True))
        if callback is not None:
            callback(trace.records[-1])
        # Barzilai-Borwein trial step; backtracking keeps the merit monotone
        dg = float(moved @ (g - g_old))
        bb = float(moved @ moved) / dg if dg > 0 else math.inf
        step = bb if math.isfinite(bb) else t * config.grow
    trace.status = "max_iters"
    return trace


def toy_tensile_plate(resolution: int = 8, order: int = 8):
    """Shipped 2D scenario: clamped plate pulled on its right edge, 8 design parameters.

    Returns ``(design0, pipeline, config, consts)``. Units: MPa and m.
    """
    scenario = RectangleScenario(length=2.0, height=1.0, n_stations=4)
    mat = MaterialParams.from_engineering(young=3.0e5, poisson=0.25, k_ic=5.0)
    pipeline = Pipeline(mat=mat, load=LoadCase(g=np.array([100.0, 0.0])),
                        measure=WeibullMeasure(m=5.0, sigma0=150.0, k_ic=5.0),
                        quad=build_quadrature(2, order), resolution=resolution)
    design0 = scenario.design([0.15, -0.15, -0.15, 0.15, 0.15, -0.15, -0.15, 0.15])
    config = OptimizationConfig(volume_target=scenario.reference_volume())
    consts = AdmissibilityConstants.for_height(scenario.height)
    return design0, pipeline, config, consts
