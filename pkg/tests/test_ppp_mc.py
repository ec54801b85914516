import math

import numpy as np
import pytest
from scipy import stats

from ceramopt.elasticity import StressField
from ceramopt.errors import ConfigError, UnsupportedMeasure
from ceramopt.fracture import TabulatedMeasure, WeibullMeasure, critical_radius
from ceramopt.geometry import RectangleScenario, generate_mesh, single_simplex_mesh
from ceramopt.ppp_mc import (McEstimate, estimate_survival, sample_cracks, sample_trial,
                             trial_rng, truncation_radius)

S0, KIC = 150.0, 5.0


def hydrostatic(dim=3):
    mesh = single_simplex_mesh(dim, 1.0)
    return mesh, StressField(np.array([S0 * np.eye(dim)]))


# -- truncation radius -----------------------------------------------------

def test_truncation_radius_examples():
    comp = StressField(np.array([-np.eye(3), -2 * np.eye(3)]))
    assert truncation_radius(comp, KIC) == math.inf
    s = StressField(np.array([np.diag([100.0, 20.0, -5.0]), np.diag([50.0, 0.0, 0.0])]))
    assert truncation_radius(s, KIC) == pytest.approx(1.9634954084936207e-3, rel=1e-14)
    assert truncation_radius(s, KIC, 0.5) == pytest.approx(0.5 * truncation_radius(s, KIC), rel=1e-15)


@pytest.mark.parametrize("safety", [0.0, -0.1, 1.5])
def test_truncation_radius_safety_range(safety):
    with pytest.raises(ConfigError):
        truncation_radius(StressField(np.array([np.eye(3)])), KIC, safety)


# -- samplers --------------------------------------------------------------

def test_zero_stress_always_survives():
    mesh = single_simplex_mesh(3)
    zero = StressField(np.zeros((1, 3, 3)))
    w = WeibullMeasure(5.0, S0, KIC)
    for t in range(200):
        assert sample_trial(mesh, zero, w, 1e-3, trial_rng(0, t)).survived


def test_sample_trial_preconditions():
    mesh, stress = hydrostatic()
    w = WeibullMeasure(5.0, S0, KIC)
    tab = TabulatedMeasure([0.1, 1.0], [1.0, 0.5])
    with pytest.raises(UnsupportedMeasure):
        sample_trial(mesh, stress, tab, 0.1, trial_rng(0, 0))
    with pytest.raises(UnsupportedMeasure):
        estimate_survival(mesh, stress, tab, 10, 0)
    for a_min in (0.0, math.inf):
        with pytest.raises(ConfigError):
            sample_trial(mesh, stress, w, a_min, trial_rng(0, 0))


def test_failed_trial_reports_a_critical_crack():
    mesh, stress = hydrostatic()
    w = WeibullMeasure(5.0, S0, KIC)
    a_min = truncation_radius(stress, KIC)
    for t in range(100):
        out = sample_trial(mesh, stress, w, a_min, trial_rng(3, t))
        if not out.survived:
            c = out.critical
            assert c.radius > critical_radius(S0, KIC)
            assert abs(np.linalg.norm(c.normal) - 1) < 1e-12
            assert abs(sum(c.barycentric) - 1) < 1e-12 and min(c.barycentric) >= 0
            return
    pytest.fail("no failed trial in 100 draws at p_f = 0.63")


def test_sampled_cracks_are_uniform():
    mesh = generate_mesh(RectangleScenario().design(np.linspace(-0.3, 0.3, 8)), 3)
    w = WeibullMeasure(4.0, S0, KIC)
    a_min = 1e-6
    rate = mesh.element_volumes.sum() * w.phi(a_min)
    c = sample_cracks(mesh, w, a_min, np.random.default_rng(5))
    k = len(c["radius"])
    assert abs(k - rate) <= 5 * math.sqrt(rate)
    # element choice proportional to volume
    counts = np.bincount(c["element"], minlength=mesh.n_elements)
    expected = k * mesh.element_volumes / mesh.element_volumes.sum()
    assert stats.chisquare(counts, expected).pvalue > 1e-4
    # orientation: isotropic second moment on the circle
    M = c["normal"].T @ c["normal"] / k
    np.testing.assert_allclose(M, 0.5 * np.eye(2), atol=5 / math.sqrt(k))
    np.testing.assert_allclose(np.linalg.norm(c["normal"], axis=1), 1.0, atol=1e-14)
    # barycentric coordinates uniform on the simplex: marginal Beta(1, dim)
    assert stats.kstest(c["barycentric"][:, 0], stats.beta(1, 2).cdf).statistic < 0.02
    assert (c["radius"] >= a_min).all()


def test_sphere_orientations_are_isotropic():
    mesh = single_simplex_mesh(3)
    c = sample_cracks(mesh, WeibullMeasure(4.0, S0, KIC), 1e-6, np.random.default_rng(9))
    n = c["normal"]
    k = len(n)
    np.testing.assert_allclose(n.mean(axis=0), 0.0, atol=5 / math.sqrt(k))
    np.testing.assert_allclose(n.T @ n / k, np.eye(3) / 3, atol=5 / math.sqrt(k))


@pytest.mark.parametrize("m", [1.0, 5.0, 12.0])
def test_radius_marginal_ks(m):
    w = WeibullMeasure(m, S0, KIC)
    a_min = 0.01
    mesh = single_simplex_mesh(3, 1e5 / w.phi(a_min))  # about 1e5 cracks in one draw
    r = sample_cracks(mesh, w, a_min, np.random.default_rng(11))["radius"]
    assert len(r) > 9e4
    cdf = lambda a: 1.0 - (a_min / np.maximum(a, a_min)) ** (m / 2)  # noqa: E731
    assert stats.kstest(r, cdf).statistic < 0.02


def test_mean_crack_count():
    mesh, stress = hydrostatic()
    w = WeibullMeasure(5.0, S0, KIC)
    a_min = truncation_radius(stress, KIC)
    n = 20000
    est = estimate_survival(mesh, stress, w, n, seed=4)
    rate = 1.0 * w.phi(a_min)
    assert rate == pytest.approx(1.0, rel=1e-12)
    assert abs(est.mean_cracks - rate) <= 3 * math.sqrt(rate / n)


# -- estimate_survival -----------------------------------------------------

def test_compressive_field_survives():
    mesh = single_simplex_mesh(3)
    est = estimate_survival(mesh, StressField(np.array([-np.eye(3)])), WeibullMeasure(5, S0, KIC),
                            500, seed=1)
    assert est.p_hat == 1.0 and est.std_err == 0.0 and est.n_survivals == 500


def test_unit_failure_count_agrees():
    mesh, stress = hydrostatic()
    est = estimate_survival(mesh, stress, WeibullMeasure(5.0, S0, KIC), 10000, seed=2)
    assert est.agrees_with(math.exp(-1))
    assert abs(est.p_hat - math.exp(-1)) <= 3 * est.std_err


def test_seed_determinism_and_thread_independence():
    mesh, stress = hydrostatic()
    w = WeibullMeasure(5.0, S0, KIC)
    a = estimate_survival(mesh, stress, w, 3000, seed=8)
    b = estimate_survival(mesh, stress, w, 3000, seed=8)
    c = estimate_survival(mesh, stress, w, 3000, seed=8, threads=4)
    assert a == b == c
    assert estimate_survival(mesh, stress, w, 3000, seed=9) != a


def test_trial_streams_are_distinct():
    x = [trial_rng(0, t).random() for t in range(5)] + [trial_rng(1, 0).random()]
    assert len(set(x)) == len(x)
    assert trial_rng(3, 4).random() == trial_rng(3, 4).random()


def test_mc_estimate_invariants():
    e = McEstimate.from_counts(400, 100, seed=3, total_cracks=800)
    assert e.p_hat == 0.25
    assert e.std_err == pytest.approx(math.sqrt(0.25 * 0.75 / 400))
    assert e.mean_cracks == 2.0
    assert list(e.to_dict()) == ["n_trials", "n_survivals", "p_hat", "std_err", "seed", "mean_cracks"]
    with pytest.raises(ConfigError):
        estimate_survival(single_simplex_mesh(3), StressField(np.zeros((1, 3, 3))),
                          WeibullMeasure(2, S0, KIC), 0, seed=0)
