"""Direct simulation of the marked Poisson point process of flaws.

Only radii above a truncation radius ``a_min`` are simulated; ``a_min`` is
chosen below every critical radius present in the stress field, so the
discarded flaws could never have caused failure. Each trial draws from its
own Philox stream keyed by ``(seed, trial)``, which makes serial and
threaded runs bit-identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .elasticity import StressField
from .errors import ConfigError, UnsupportedMeasure
from .fracture import CrackSizeMeasure, PowerLawMeasure, critical_radius, stress_intensity
from .geometry import Mesh


@dataclass(frozen=True)
class CrackConfiguration:
    element: int
    barycentric: tuple
    position: tuple
    normal: tuple
    radius: float


@dataclass(frozen=True)
class TrialOutcome:
    survived: bool
    n_cracks: int
    critical: Optional[CrackConfiguration] = None


@dataclass(frozen=True)
class McEstimate:
    n_trials: int
    n_survivals: int
    p_hat: float
    std_err: float
    seed: int
    mean_cracks: float = 0.0

    @classmethod
    def from_counts(cls, n_trials: int, n_survivals: int, seed: int, total_cracks: int = 0):
        p = n_survivals / n_trials
        return cls(n_trials, n_survivals, p, math.sqrt(p * (1 - p) / n_trials), seed,
                   total_cracks / n_trials)

    def agrees_with(self, p_s: float, n_sigma: float = 3.0) -> bool:
        return abs(self.p_hat - p_s) <= n_sigma * self.std_err

    def to_dict(self) -> dict:
        return {"n_trials": self.n_trials, "n_survivals": self.n_survivals, "p_hat": self.p_hat,
                "std_err": self.std_err, "seed": self.seed, "mean_cracks": self.mean_cracks}


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent counter-based stream for one trial."""
    key = np.array([trial, seed], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def truncation_radius(stress: StressField, k_ic: float, safety: float = 1.0) -> float:
    """``safety`` times the smallest critical radius over elements (``inf`` if nothing is tensile)."""
    if not 0 < safety <= 1:
        raise ConfigError("safety factor must lie in ]0, 1]")
    if not isinstance(stress, StressField):
        stress = StressField(np.asarray(stress, float))
    smax = float(np.max(stress.max_principal()))
    if smax <= 0:
        return math.inf
    return safety * critical_radius(smax, k_ic)


def _uniform_directions(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    if dim == 2:
        t = rng.uniform(0.0, 2 * np.pi, k)
        return np.column_stack([np.cos(t), np.sin(t)])
    z = rng.uniform(-1.0, 1.0, k)
    t = rng.uniform(0.0, 2 * np.pi, k)
    s = np.sqrt(1 - z * z)
    return np.column_stack([s * np.cos(t), s * np.sin(t), z])


def _require_power_law(measure: CrackSizeMeasure) -> PowerLawMeasure:
    if not isinstance(measure, PowerLawMeasure):
        raise UnsupportedMeasure("the flaw simulator needs an invertible power-law (Weibull) tail")
    return measure


def sample_cracks(mesh: Mesh, measure: CrackSizeMeasure, a_min: float,
                  rng: np.random.Generator) -> dict:
    """One realization of the flaws with radius above ``a_min`` as arrays."""
    measure = _require_power_law(measure)
    vols = mesh.element_volumes
    total = float(np.sum(vols))
    k = int(rng.poisson(total * measure.phi(a_min)))
    cdf = np.cumsum(vols) / total
    elem = np.minimum(np.searchsorted(cdf, rng.random(k), side="right"), mesh.n_elements - 1)
    bary = rng.dirichlet(np.ones(mesh.dim + 1), k) if k else np.zeros((0, mesh.dim + 1))
    pos = np.einsum("ka,kai->ki", bary, mesh.nodes[mesh.elements[elem]])
    normals = _uniform_directions(rng, k, mesh.dim)
    radius = measure.tail_radius(a_min, 1.0 - rng.random(k))
    return {"element": elem, "barycentric": bary, "position": pos, "normal": normals,
            "radius": radius}


def sample_trial(mesh: Mesh, stress: StressField, measure: CrackSizeMeasure, a_min: float,
                 rng: np.random.Generator, k_ic: Optional[float] = None) -> TrialOutcome:
    """Simulate one component; it fails if any flaw has ``K_I > K_Ic``."""
    measure = _require_power_law(measure)
    k_ic = measure.k_ic if k_ic is None else k_ic
    if not (a_min > 0 and math.isfinite(a_min)):
        raise ConfigError("truncation radius must be finite and positive")
    c = sample_cracks(mesh, measure, a_min, rng)
    if len(c["radius"]) == 0:
        return TrialOutcome(True, 0)
    sig = np.asarray(stress.tensors)[c["element"]]
    sn = np.maximum(np.einsum("ki,kij,kj->k", c["normal"], sig, c["normal"]), 0.0)
    crit = stress_intensity(c["radius"], sn) > k_ic
    if not crit.any():
        return TrialOutcome(True, len(sn))
    i = int(np.argmax(crit))
    cfg = CrackConfiguration(int(c["element"][i]), tuple(c["barycentric"][i].tolist()),
                             tuple(c["position"][i].tolist()), tuple(c["normal"][i].tolist()),
                             float(c["radius"][i]))
    return TrialOutcome(False, len(sn), cfg)


def estimate_survival(mesh: Mesh, stress: StressField, measure: CrackSizeMeasure,
                      n_trials: int, seed: int, safety: float = 1.0,
                      k_ic: Optional[float] = None, threads: int = 1) -> McEstimate:
    """Fraction of surviving trials with its binomial standard error."""
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    measure = _require_power_law(measure)
    k_ic = measure.k_ic if k_ic is None else k_ic
    a_min = truncation_radius(stress, k_ic, safety)
    if math.isinf(a_min):
        return McEstimate.from_counts(n_trials, n_trials, seed)

    def run(block):
        surv = cracks = 0
        for t in block:
            out = sample_trial(mesh, stress, measure, a_min, trial_rng(seed, t), k_ic)
            surv += out.survived
            cracks += out.n_cracks
        return surv, cracks

    blocks = np.array_split(np.arange(n_trials), max(1, threads) * 4)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    surv = sum(r[0] for r in results)
    cracks = sum(r[1] for r in results)
    return McEstimate.from_counts(n_trials, surv, seed, cracks)
