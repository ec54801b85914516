import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ceramopt.errors import ConfigError, NegativeInput, NonpositiveRadius, NonUnitNormal
from ceramopt.fracture import (PowerLawMeasure, TabulatedMeasure, WeibullMeasure,
                               critical_radius, hazard_convexity_check, normal_stress,
                               stress_intensity)

KAPPA = np.geomspace(1e-2, 1e2, 41)
pos = st.floats(1e-6, 1e6, allow_nan=False)


# -- stress_intensity ------------------------------------------------------

def test_stress_intensity_examples():
    assert stress_intensity(0.0, 100.0) == 0.0
    assert stress_intensity(1 / math.pi, 1.0) == pytest.approx(2 / math.pi, rel=1e-15)
    a = critical_radius(100.0, 5.0)
    assert stress_intensity(a, 100.0) == pytest.approx(5.0, rel=1e-14)


def test_stress_intensity_rejects_negative():
    with pytest.raises(NegativeInput):
        stress_intensity(-1e-3, 1.0)
    with pytest.raises(NegativeInput):
        stress_intensity(1.0, -1.0)


@given(pos, pos, st.floats(0.01, 100))
def test_stress_intensity_homogeneity(a, s, t):
    k = stress_intensity(a, s)
    assert stress_intensity(a, t * s) == pytest.approx(t * k, rel=1e-12)
    assert stress_intensity(t * a, s) == pytest.approx(math.sqrt(t) * k, rel=1e-12)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.1, 10.0))
def test_failure_criterion_equivalence(s, a_rel, k_ic):
    ac = critical_radius(s, k_ic)
    a = ac * a_rel
    assume(abs(a_rel - 1.0) > 1e-9)
    assert (stress_intensity(a, s) > k_ic) == (a > ac)


# -- normal_stress ---------------------------------------------------------

def test_normal_stress_examples():
    n = np.array([0.6, 0.0, 0.8])
    assert normal_stress(np.eye(3), n) == pytest.approx(1.0, rel=1e-15)
    assert normal_stress(np.diag([1.0, -2.0, 0.0]), [0.0, 1.0, 0.0]) == 0.0
    e = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
    assert normal_stress(np.diag([3.0, 0.0, 0.0]), e) == pytest.approx(1.5, rel=1e-15)


def test_normal_stress_rejects_non_unit():
    with pytest.raises(NonUnitNormal):
        normal_stress(np.eye(3), [1.0, 1e-5, 0.0])
    # within the 1e-12 tolerance
    assert normal_stress(np.eye(3), [1.0, 1e-7, 0.0]) == pytest.approx(1.0)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_normal_stress_sign_invariance(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3))
    s = a + a.T
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    assert normal_stress(s, n) == normal_stress(s, -n)


# -- critical_radius -------------------------------------------------------

def test_critical_radius_examples():
    assert critical_radius(0.0, 5.0) == math.inf
    assert critical_radius(100.0, 5.0) == pytest.approx(1.9634954084936207e-3, rel=1e-14)
    out = critical_radius(np.array([0.0, 100.0]), 5.0)
    assert math.isinf(out[0]) and out[1] > 0


def test_unit_critical_radius_roundtrip():
    # sigma_n with a_c = 1
    k_ic = 5.0
    s = k_ic * math.sqrt(math.pi) / 2
    assert critical_radius(s, k_ic) == pytest.approx(1.0, rel=1e-15)
    assert stress_intensity(1.0, s) == pytest.approx(k_ic, rel=1e-15)


# -- measures --------------------------------------------------------------

def test_weibull_phi_examples():
    w = WeibullMeasure(m=5.0, sigma0=150.0, k_ic=5.0)
    a0 = (math.pi / 4) * (5.0 / 150.0) ** 2
    assert w.phi(a0) == pytest.approx(1.0, rel=1e-13)
    w4 = WeibullMeasure(m=4.0, sigma0=150.0, k_ic=5.0)
    assert w4.phi(0.2) / w4.phi(0.1) == pytest.approx(0.25, rel=1e-14)
    assert w.phi(1e300) < 1e-300
    assert w.failure_intensity(0.0, 5.0) == 0.0


@given(st.floats(1.0, 30.0), st.floats(1.0, 1e3), st.floats(0.1, 20.0), st.floats(1e-3, 1e4))
def test_weibull_composition_is_power_law(m, s0, k_ic, sn):
    w = WeibullMeasure(m, s0, k_ic)
    assert w.failure_intensity(sn, k_ic) == pytest.approx((sn / s0) ** m, rel=1e-10)


@given(st.floats(1.0, 30.0), st.floats(1.0, 1e3), st.floats(0.1, 20.0))
def test_density_parametrization_roundtrip(m, s0, k_ic):
    w = WeibullMeasure(m, s0, k_ic)
    assert w.beta == pytest.approx(m / 2 + 1)
    back = WeibullMeasure.from_density(w.alpha0, w.beta, k_ic)
    assert back.m == pytest.approx(m, rel=1e-12)
    assert back.sigma0 == pytest.approx(s0, rel=1e-10)


@given(st.floats(0.1, 30.0), st.lists(pos, min_size=2, max_size=20))
def test_phi_non_increasing(m, radii):
    w = PowerLawMeasure(m, 100.0, 3.0)
    a = np.sort(radii)
    assert (np.diff(w.phi(a)) <= 0).all()


def test_phi_rejects_nonpositive_radius():
    with pytest.raises(NonpositiveRadius):
        WeibullMeasure(5, 150, 5).phi(0.0)
    with pytest.raises(NonpositiveRadius):
        TabulatedMeasure([0.1, 1.0], [2.0, 1.0]).phi(-1.0)


def test_weibull_requires_m_at_least_one():
    with pytest.raises(ConfigError):
        WeibullMeasure(0.9, 150.0, 5.0)
    PowerLawMeasure(0.5, 150.0, 5.0)  # allowed for diagnostics
    with pytest.raises(ConfigError):
        PowerLawMeasure(0.0, 150.0, 5.0)


def test_tabulated_interpolation_and_tail():
    t = TabulatedMeasure([0.1, 0.2, 0.4], [4.0, 2.0, 1.0])
    assert t.phi(0.15) == pytest.approx(3.0)
    assert t.phi(0.05) == 4.0
    assert t.phi(0.4) == 1.0
    assert t.phi(0.41) == 0.0


@pytest.mark.parametrize("radii,values", [
    ([0.2, 0.1], [1.0, 0.5]),   # decreasing radii
    ([0.1, 0.2], [1.0, 2.0]),   # increasing Phi
    ([0.1], [1.0]),
    ([0.0, 0.2], [1.0, 0.5]),
])
def test_tabulated_validation(radii, values):
    with pytest.raises(ConfigError):
        TabulatedMeasure(radii, values)


def test_tabulated_from_file(tmp_path):
    p = tmp_path / "phi.txt"
    p.write_text("0.1 4.0\n0.2 2.0\n0.4 1.0\n")
    t = TabulatedMeasure.from_file(p)
    assert t.phi(0.3) == pytest.approx(1.5)
    p.write_text("0.4 1.0\n0.2 2.0\n")
    with pytest.raises(ConfigError):
        TabulatedMeasure.from_file(p)
    p.write_text("0.1 1.0 3.0\n")
    with pytest.raises(ConfigError):
        TabulatedMeasure.from_file(p)


# -- hazard convexity ------------------------------------------------------

@pytest.mark.parametrize("m", [1.0, 2.0, 5.0, 10.0, 25.0])
def test_hazard_passes_for_weibull(m):
    assert hazard_convexity_check(WeibullMeasure(m, 150.0, 5.0), KAPPA)


@pytest.mark.parametrize("m", [0.25, 0.5, 0.9])
def test_hazard_fails_below_one(m):
    res = hazard_convexity_check(PowerLawMeasure(m, 150.0, 5.0), KAPPA)
    assert not res
    k1, k2 = res.witness
    w = PowerLawMeasure(m, 150.0, 5.0)
    assert w.hazard(0.5 * (k1 + k2)) > 0.5 * (w.hazard(k1) + w.hazard(k2))


@settings(max_examples=40)
@given(st.floats(0.05, 40.0))
def test_hazard_check_iff_m_at_least_one(m):
    res = hazard_convexity_check(PowerLawMeasure(m, 150.0, 5.0), KAPPA)
    assert bool(res) == (m >= 1.0)


def test_hazard_is_power_of_kappa():
    w = WeibullMeasure(3.0, 150.0, 5.0)
    ratio = w.hazard(2 * KAPPA) / w.hazard(KAPPA)
    np.testing.assert_allclose(ratio, 8.0, rtol=1e-12)
    assert w.hazard(0.0) == 0.0 and w.hazard(-1.0) == 0.0


def test_tabulated_convex_hazard_passes():
    w = WeibullMeasure(4.0, 150.0, 5.0)
    a = np.geomspace(1e-6, 1e4, 400)
    assert hazard_convexity_check(TabulatedMeasure(a, w.phi(a)), np.geomspace(0.02, 50, 41))


def test_tabulated_concave_hazard_fails():
    w = PowerLawMeasure(0.5, 150.0, 5.0)
    a = np.geomspace(1e-6, 1e4, 400)
    assert not hazard_convexity_check(TabulatedMeasure(a, w.phi(a)), np.geomspace(0.02, 50, 41))


def test_hazard_grid_validation():
    w = WeibullMeasure(2, 150, 5)
    with pytest.raises(ConfigError):
        hazard_convexity_check(w, [1.0, 0.5])
    with pytest.raises(ConfigError):
        hazard_convexity_check(w, [0.0, 1.0])
