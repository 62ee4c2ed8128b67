import math

import numpy as np
import pytest

from qpdl.modules.potential import (
    FourierSeries,
    analytic_norm_bound,
    cosine,
    eval_potential,
    eval_series,
    from_triples,
    orbit_values,
    random_analytic,
    shifted,
    sup_bound,
    zero,
)


def test_zero_potential_evaluates_to_zero():
    assert eval_potential(zero(1), [1.234]) == 0.0
    assert analytic_norm_bound(zero(1), 0.5) == 0.0


@pytest.mark.parametrize("theta, expected", [(0.0, 0.002), (math.pi / 3, 0.001)])
def test_cosine_values(theta, expected):
    assert eval_potential(cosine(1e-3), [theta]) == pytest.approx(expected, abs=1e-15)


def test_cosine_analytic_norm():
    assert analytic_norm_bound(cosine(1e-3), 0.5) == pytest.approx(0.0032974, abs=1e-7)
    for r in (0.1, 0.5, 2.0):
        assert analytic_norm_bound(cosine(0.02), r) / 0.04 == pytest.approx(math.exp(r), rel=1e-14)


def test_constant_norm_independent_of_radius():
    V = from_triples([((0,), 0.7, 0.0)], d=1)
    for r in (0.1, 1.0, 3.0):
        assert analytic_norm_bound(V, r) == pytest.approx(0.7)


def test_norm_monotone_in_radius():
    V = random_analytic(0.05, 0.5, 4, seed=3)
    values = [analytic_norm_bound(V, r) for r in np.linspace(0.05, 2.0, 12)]
    assert np.all(np.diff(values) >= 0)


def test_reality_condition_enforced():
    with pytest.raises(ValueError):
        FourierSeries(np.array([[1], [-1]]), np.array([1.0, 2.0]))


def test_from_triples_fills_conjugate_partner():
    V = from_triples([((1,), 0.5, 0.25)], d=1)
    assert V.coefficient([-1]) == pytest.approx(0.5 - 0.25j)
    assert V.coefficient([5]) == 0


def test_random_analytic_coefficient_sum():
    V = random_analytic(0.05, 0.5, 3, seed=11, d=2)
    assert sup_bound(V) == pytest.approx(0.05)
    theta = np.random.default_rng(0).uniform(0, 2 * math.pi, size=(20, 2))
    assert np.all(np.abs(eval_series(V, theta)) <= 0.05 + 1e-12)


def test_shift_by_zero_is_identity():
    V = random_analytic(0.05, 0.5, 4, seed=1)
    np.testing.assert_allclose(shifted(V, [0.0]).coeffs, V.coeffs)


def test_half_period_shift_negates_cosine():
    V = shifted(cosine(1.0), [math.pi])
    np.testing.assert_allclose(V.coeffs, -cosine(1.0).coeffs, atol=1e-14)


def test_shift_matches_pointwise_evaluation():
    rng = np.random.default_rng(7)
    V = random_analytic(0.1, 0.5, 5, seed=2)
    delta = rng.uniform(0, 2 * math.pi, 1)
    theta = rng.uniform(0, 2 * math.pi, 100)
    np.testing.assert_allclose(eval_series(shifted(V, delta), theta),
                               eval_series(V, theta + delta[0]), atol=1e-12)


def test_orbit_values_follow_rotation(golden):
    V = cosine(0.01)
    n = np.arange(-3, 4)
    expected = 0.02 * np.cos(0.3 + n * golden.vector[0])
    np.testing.assert_allclose(orbit_values(V, 0.3, golden.vector, n), expected, atol=1e-15)
