"""Penny-shaped crack criterion and crack-size measures.

A crack of radius ``a`` under normal tension ``sigma_n`` has mode-I stress
intensity ``K_I = (2/pi) sigma_n sqrt(pi a)`` and propagates once
``K_I > K_Ic``, i.e. once ``a`` exceeds ``(pi/4) (K_Ic / sigma_n)**2``.

Crack-size measures are described by their exceedance function
``Phi(a) = rho(]a, inf[)`` (expected number of cracks per unit volume with
radius above ``a``). Radii are in units of the reference length ``a0 = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, NegativeInput, NonpositiveRadius, NonUnitNormal

UNIT_TOL = 1e-12


def stress_intensity(a, sigma_n):
    """Mode-I stress intensity of a penny crack of radius ``a`` under normal stress ``sigma_n``."""
    a = np.asarray(a, dtype=float)
    sigma_n = np.asarray(sigma_n, dtype=float)
    if (a < 0).any() or (sigma_n < 0).any():
        raise NegativeInput("crack radius and normal stress must be non-negative")
    out = (2.0 / math.pi) * sigma_n * np.sqrt(math.pi * a)
    return float(out) if out.ndim == 0 else out


def normal_stress(sigma, n) -> float:
    """Tensile part ``max(n . sigma n, 0)`` of the normal stress on the plane with normal ``n``."""
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise NonUnitNormal(f"|n| = {np.linalg.norm(n)!r} is not 1")
    return max(float(n @ np.asarray(sigma, float) @ n), 0.0)


def critical_radius(sigma_n, k_ic: float):
    """Smallest radius that fails under ``sigma_n``; ``math.inf`` where ``sigma_n == 0``."""
    s = np.asarray(sigma_n, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(s > 0, (math.pi / 4.0) * (k_ic / np.where(s > 0, s, 1.0)) ** 2, math.inf)
    return float(out) if out.ndim == 0 else out


class CrackSizeMeasure:
    """Base class; subclasses implement :meth:`phi` for positive radii."""

    def phi(self, a):
        raise NotImplementedError

    def hazard(self, kappa):
        """``H(kappa) = Phi(1 / kappa**2)``, extended by 0 for ``kappa <= 0``."""
        k = np.asarray(kappa, dtype=float)
        with np.errstate(divide="ignore"):
            a = np.where(k > 0, 1.0 / np.where(k > 0, k, 1.0) ** 2, math.inf)
        out = np.where(k > 0, self._phi(a), 0.0)
        return float(out) if out.ndim == 0 else out

    def failure_intensity(self, sigma_n, k_ic: float):
        """``Phi(critical_radius(sigma_n))`` with 0 for non-tensile ``sigma_n``."""
        a = critical_radius(np.maximum(sigma_n, 0.0), k_ic)
        return self._phi(a)

    def _phi(self, a):
        """``phi`` without input checks and with ``Phi(inf) = 0``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerLawMeasure(CrackSizeMeasure):
    """Power-law tail ``Phi(a) = (sqrt(pi) K_Ic / (2 sigma0))**m * a**(-m/2)``.

    Composed with the critical radius this gives ``(sigma_n / sigma0)**m``.
    Any ``m > 0`` is accepted here; use :class:`WeibullMeasure` for the
    physically admissible range ``m >= 1``.
    """

    m: float
    sigma0: float
    k_ic: float

    def __post_init__(self):
        if not (self.m > 0 and self.sigma0 > 0 and self.k_ic > 0):
            raise ConfigError("power-law measure needs m > 0, sigma0 > 0, K_Ic > 0")

    @property
    def prefactor(self) -> float:
        return (math.sqrt(math.pi) * self.k_ic / (2.0 * self.sigma0)) ** self.m

    @property
    def beta(self) -> float:
        """Exponent of the radius density ``rho(a) ~ a**(-beta)``."""
        return self.m / 2.0 + 1.0

    @property
    def alpha0(self) -> float:
        """Offset of ``-log`` of the radius density ``exp(-alpha0) a**(-beta)``."""
        return -math.log((self.beta - 1.0) * self.prefactor)

    def phi(self, a):
        a_arr = np.asarray(a, dtype=float)
        if (a_arr <= 0).any():
            raise NonpositiveRadius("Phi is defined for positive radii only")
        return self._phi(a)

    def _phi(self, a):
        a = np.asarray(a, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(np.isinf(a), 0.0, self.prefactor * a ** (-self.m / 2.0))
        return float(out) if out.ndim == 0 else out

    def tail_radius(self, a_min: float, u):
        """Inverse CDF of the radius given ``a > a_min``: ``a_min * u**(-2/m)``, ``u`` in (0, 1]."""
        return a_min * np.asarray(u, float) ** (-2.0 / self.m)

    def to_dict(self) -> dict:
        return {"kind": "weibull", "m": self.m, "sigma0": self.sigma0, "K_Ic": self.k_ic}


@dataclass(frozen=True)
class WeibullMeasure(PowerLawMeasure):
    """Weibull crack-size measure, parametrized by modulus ``m >= 1`` and scale ``sigma0``."""

    def __post_init__(self):
        super().__post_init__()
        if self.m < 1:
            raise ConfigError(f"Weibull modulus must satisfy m >= 1, got {self.m}")

    @classmethod
    def from_density(cls, alpha0: float, beta: float, k_ic: float) -> "WeibullMeasure":
        """From the radius density ``exp(-alpha0) a**(-beta)``."""
        m = 2.0 * (beta - 1.0)
        phi_coeff = math.exp(-alpha0) / (beta - 1.0)
        sigma0 = math.sqrt(math.pi) * k_ic / (2.0 * phi_coeff ** (1.0 / m))
        return cls(m, sigma0, k_ic)


class TabulatedMeasure(CrackSizeMeasure):
    """``Phi`` given on a radius grid, linearly interpolated, 0 beyond the last radius.

    Below the first grid radius ``Phi`` is held at its first value. Atomic
    measures (jumps in ``Phi``) are not representable.
    """

    def __init__(self, radii, values):
        a = np.asarray(radii, dtype=float)
        v = np.asarray(values, dtype=float)
        if a.ndim != 1 or a.shape != v.shape or len(a) < 2:
            raise ConfigError("tabulated Phi needs matching 1-D arrays with >= 2 rows")
        if (np.diff(a) <= 0).any():
            raise ConfigError("tabulated radii must be strictly increasing")
        if (a <= 0).any() or (v < 0).any() or (np.diff(v) > 0).any():
            raise ConfigError("tabulated Phi must be non-negative and non-increasing on a > 0")
        self.radii, self.values = a, v

    @classmethod
    def from_file(cls, path) -> "TabulatedMeasure":
        try:
            data = np.loadtxt(Path(path), ndmin=2)
        except ValueError as exc:
            raise ConfigError(f"cannot parse tabulated Phi file {path}: {exc}") from exc
        if data.shape[1] != 2:
            raise ConfigError("tabulated Phi file must have two columns (a, Phi)")
        return cls(data[:, 0], data[:, 1])

    def phi(self, a):
        a_arr = np.asarray(a, dtype=float)
        if (a_arr <= 0).any():
            raise NonpositiveRadius("Phi is defined for positive radii only")
        return self._phi(a)

    def _phi(self, a):
        a = np.asarray(a, dtype=float)
        out = np.interp(a, self.radii, self.values, right=0.0)
        out = np.where(a > self.radii[-1], 0.0, out)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {"kind": "tabulated", "radii": self.radii.tolist(), "values": self.values.tolist()}


@dataclass
class HazardCheck:
    passed: bool
    witness: Optional[tuple] = None  # (kappa_i, kappa_j) violating midpoint convexity
    reason: str = ""

    def __bool__(self):
        return self.passed


def hazard_convexity_check(measure: CrackSizeMeasure, kappa_grid, rtol: float = 1e-12) -> HazardCheck:
    """Midpoint convexity of ``H(kappa) = Phi(1/kappa**2)`` over all grid pairs.

    Power-law measures are additionally required to have ``m >= 1``, which is
    the closed-form convexity condition of ``H(kappa) ~ kappa**m``.
    """
    k = np.asarray(kappa_grid, dtype=float)
    if k.ndim != 1 or (k <= 0).any() or (np.diff(k) <= 0).any():
        raise ConfigError("kappa grid must be strictly increasing and positive")
    H = measure.hazard(k)
    i, j = np.triu_indices(len(k), 1)
    mid = measure.hazard(0.5 * (k[i] + k[j]))
    chord = 0.5 * (H[i] + H[j])
    slack = rtol * np.maximum(np.abs(chord), np.finfo(float).tiny)
    bad = mid > chord + slack
    if bad.any():
        worst = int(np.argmax(np.where(bad, (mid - chord) / np.maximum(np.abs(chord), 1e-300), -np.inf)))
        return HazardCheck(False, (float(k[i[worst]]), float(k[j[worst]])),
                           "midpoint convexity violated")
    if isinstance(measure, PowerLawMeasure) and measure.m < 1:
        return HazardCheck(False, None, f"power-law exponent m = {measure.m} < 1")
    return HazardCheck(True)
