"""Local failure intensity, the failure-count objective and survival probability.

The expected number of critical flaws is

    J = sum_e |e| * sum_i w_i * Phi(critical_radius((n_i . sigma_e n_i)^+))

with ``(n_i, w_i)`` a normalized quadrature on the orientation sphere. In 2D
the orientation integral runs over the unit circle (a desk-scale analog of
the 3D model; the penny-crack formula is kept unchanged).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .elasticity import StressField
from .errors import ConfigError, NegativeIntensity
from .fracture import CrackSizeMeasure, PowerLawMeasure
from .geometry import Mesh

DEFAULT_ORDER = 16
_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class OrientationQuadrature:
    """Nodes on the unit sphere (circle in 2D) with weights summing to one."""

    dim: int
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Mean over orientations of ``values[..., i]`` sampled at node ``i``."""
        return values @ self.weights


def build_quadrature(dim: int, order: int = DEFAULT_ORDER) -> OrientationQuadrature:
    """Product rule exact for spherical polynomials of degree ``<= 4*order - 1``.

    3D: ``2*order`` Gauss-Legendre points in ``mu = cos(theta)`` times
    ``4*order`` equispaced azimuths. 2D: ``4*order`` equispaced angles
    starting at 0. Both rules are symmetric under ``n -> -n``.
    """
    if int(order) != order or order < 1:
        raise ConfigError("quadrature order must be a positive integer")
    order = int(order)
    n_phi = 4 * order
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    if dim == 2:
        nodes = np.column_stack([np.cos(phi), np.sin(phi)])
        weights = np.full(n_phi, 1.0 / n_phi)
    elif dim == 3:
        mu, wmu = np.polynomial.legendre.leggauss(2 * order)
        s = np.sqrt(1.0 - mu ** 2)
        nodes = np.column_stack([
            np.outer(s, np.cos(phi)).ravel(),
            np.outer(s, np.sin(phi)).ravel(),
            np.repeat(mu, n_phi),
        ])
        weights = np.repeat(wmu / 2.0, n_phi) / n_phi
    else:
        raise ConfigError("orientation quadrature exists for dim 2 or 3 only")
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    weights = weights / weights.sum()
    for a in (nodes, weights):
        a.setflags(write=False)
    return OrientationQuadrature(dim, order, nodes, weights)


def _normal_stresses(q: np.ndarray, quad: OrientationQuadrature) -> np.ndarray:
    """Tensile normal stress per (tensor, node), shape ``(..., n_nodes)``.

    Evaluated in the principal frame of each tensor: the orientation average
    only depends on the eigenvalues, and this makes the discrete ``h``
    exactly invariant under rotations of the component.
    """
    lam = np.linalg.eigvalsh(q)
    sn = lam @ (quad.nodes ** 2).T
    return np.maximum(sn, 0.0)


def _check_shape(q: np.ndarray, quad: OrientationQuadrature) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-2:] != (quad.dim, quad.dim):
        raise ConfigError(f"tensor shape {q.shape[-2:]} does not match quadrature dim {quad.dim}")
    return q


def local_intensity(q, measure: CrackSizeMeasure, quad: OrientationQuadrature, k_ic: float):
    """Orientation average of ``Phi`` at the critical radius; accepts a stack of tensors."""
    q = _check_shape(q, quad)
    flat = q.reshape(-1, quad.dim, quad.dim)
    out = np.empty(len(flat))
    for s in range(0, len(flat), _CHUNK):
        sn = _normal_stresses(flat[s:s + _CHUNK], quad)
        out[s:s + _CHUNK] = quad.integrate(measure.failure_intensity(sn, k_ic))
    out = out.reshape(q.shape[:-2])
    return float(out) if out.ndim == 0 else out


def weibull_local_intensity(q, m: float, sigma0: float, quad: OrientationQuadrature):
    """Orientation average of ``((n.q n)^+ / sigma0)**m``."""
    if m < 1 or sigma0 <= 0:
        raise ConfigError("Weibull intensity needs m >= 1 and sigma0 > 0")
    q = _check_shape(q, quad)
    out = quad.integrate((_normal_stresses(q, quad) / sigma0) ** m)
    return float(out) if np.ndim(out) == 0 else out


def survival_probability(J: float) -> float:
    if J < 0 or math.isnan(J):
        raise NegativeIntensity(f"expected flaw count must be non-negative, got {J!r}")
    return math.exp(-J)


@dataclass
class ReliabilityResult:
    J: float
    p_s: float
    per_element: np.ndarray
    quadrature: dict = field(default_factory=dict)
    measure: dict = field(default_factory=dict)

    @property
    def n_elements(self) -> int:
        return len(self.per_element)

    def to_dict(self) -> dict:
        d = {
            "J": self.J,
            "p_s": self.p_s,
            "n_elements": self.n_elements,
            "per_element": [float(v) for v in self.per_element],
            "quadrature": dict(self.quadrature),
            "measure": dict(self.measure),
        }
        if self.quadrature.get("dim") == 2:
            d["model"] = "2d-desk-scale (orientations on the unit circle, penny-crack K_I)"
        return d


def objective(mesh: Mesh, stress: StressField, measure: CrackSizeMeasure,
              quad: OrientationQuadrature, k_ic: float) -> ReliabilityResult:
    """Expected number of critical flaws ``J`` and ``p_s = exp(-J)``."""
    tensors = np.asarray(getattr(stress, "tensors", stress), float)
    if len(tensors) != mesh.n_elements:
        raise ConfigError("stress field does not match the mesh")
    contrib = mesh.element_volumes * np.atleast_1d(local_intensity(tensors, measure, quad, k_ic))
    J = float(np.sum(contrib))  # pairwise summation, fixed order
    return ReliabilityResult(J, survival_probability(J), contrib,
                             {"dim": quad.dim, "order": quad.order}, measure.to_dict())


def convergence_table(mesh: Mesh, stress: StressField, measure: CrackSizeMeasure,
                      k_ic: float, orders: Iterable[int]) -> list[tuple[int, float]]:
    """``(order, J)`` for each requested quadrature order."""
    return [(int(p), objective(mesh, stress, measure, build_quadrature(mesh.dim, p), k_ic).J)
            for p in orders]
