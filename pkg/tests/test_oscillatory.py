import math

import numpy as np
import pytest
from scipy import special

from qpdl.modules.kam import schedule_for
from qpdl.modules.oscillatory import (
    H_CAP,
    PhaseProfile,
    certified_IM_bound,
    fresnel_reference,
    fuzz_bounds,
    oscillatory_quadrature,
    random_amplitude,
    spectral_osc_integral,
    vdc_bound,
)
from qpdl.modules.potential import zero


def one(x):
    return np.ones_like(x)


@pytest.fixture
def quadratic():
    return PhaseProfile.polynomial([0.0, 0.0, 0.5], 0.0, 1.0, k=2)


@pytest.fixture
def free_sched():
    return schedule_for(zero(1), 1)


# ===============================
# Van der Corput and the quadrature oracle
# ===============================

@pytest.mark.parametrize("lam", [10.0, 100.0, 1000.0])
def test_quadrature_matches_fresnel(quadratic, lam):
    result = oscillatory_quadrature(quadratic, one, lam)
    assert result.converged
    assert abs(result.value - fresnel_reference(lam)) <= 1e-8


def test_fresnel_instance_value(quadratic):
    value = oscillatory_quadrature(quadratic, one, 100.0).value
    assert 0.1 <= abs(value) <= 0.13
    assert vdc_bound(quadratic, 100.0, 1.0, 0.0) == pytest.approx(0.8)


@pytest.mark.parametrize("lam", [10.0, 100.0, 1000.0, 1e4])
def test_quadratic_phase_within_vdc(quadratic, lam):
    assert quadratic.c == pytest.approx(1.0)
    value = oscillatory_quadrature(quadratic, one, lam).value
    assert abs(value) <= vdc_bound(quadratic, lam, 1.0, 0.0)
    assert vdc_bound(quadratic, lam, 1.0, 0.0) == pytest.approx(8.0 / math.sqrt(lam))


@pytest.mark.parametrize("lam", [10.0, 1000.0])
def test_cubic_phase_within_vdc(lam):
    cubic = PhaseProfile.polynomial([0.0, 0.0, 0.0, 1.0 / 6.0], 0.0, 1.0, k=3)
    value = oscillatory_quadrature(cubic, one, lam).value
    assert abs(value) <= vdc_bound(cubic, lam, 1.0, 0.0)


def test_amplitude_enters_bound(quadratic):
    def h(x):
        return 1.0 + x

    value = oscillatory_quadrature(quadratic, h, 200.0).value
    assert abs(value) <= vdc_bound(quadratic, 200.0, 2.0, 1.0)


def test_profile_checks_derivative_floor():
    with pytest.raises(ValueError):
        PhaseProfile.polynomial([0.0, 0.0, 0.5], -1.0, 1.0, k=2, c=2.0)
    with pytest.raises(ValueError):
        PhaseProfile.polynomial([0.0, 0.0, 0.0, 1.0], 0.0, 1.0, k=2)
    with pytest.raises(ValueError):
        PhaseProfile.polynomial([0.0, 0.0, 0.5], 0.0, 1.0, k=4, c=1.0)
    with pytest.raises(ValueError):
        PhaseProfile.polynomial([0.0, 0.0, 0.5], 1.0, 0.0, k=2, c=1.0)


def test_vdc_needs_nonzero_lambda(quadratic):
    with pytest.raises(ValueError):
        vdc_bound(quadratic, 0.0, 1.0, 0.0)


# ===============================
# Spectral integral on the free grid
# ===============================

def test_free_integral_total_mass(free_spectral_grid):
    h = np.ones_like(free_spectral_grid.energies)
    result = spectral_osc_integral(h, 0.0, 0.0, free_spectral_grid)
    assert result.direct == pytest.approx(math.pi, abs=1e-3)
    assert math.isnan(result.bound)


@pytest.mark.parametrize("M", [1, 2, 5])
def test_free_cosine_moments_vanish(free_spectral_grid, M):
    h = np.ones_like(free_spectral_grid.energies)
    assert abs(spectral_osc_integral(h, M, 0.0, free_spectral_grid).direct) <= 1e-3


@pytest.mark.parametrize("M, t", [(0, 0.0), (3, 20.0), (0, 40.0), (10, 0.0)])
def test_free_integral_within_bound(free_spectral_grid, free_partition, free_sched, M, t):
    h = np.ones_like(free_spectral_grid.energies)
    result = spectral_osc_integral(h, M, t, free_spectral_grid, free_partition, free_sched, 1)
    assert not result.violated
    assert abs(result.direct) <= result.bound
    assert result.components == 1


def test_large_M_uses_integration_by_parts(free_spectral_grid, free_partition, free_sched):
    h = np.ones_like(free_spectral_grid.energies)
    detail = certified_IM_bound(h, free_spectral_grid, free_partition, 10.0, 0.0, free_sched, 1)
    assert detail.source == "integration_by_parts"
    assert detail.closed_form is not None
    assert detail.step1 > 0


def test_moderate_M_uses_van_der_corput(free_spectral_grid, free_partition, free_sched):
    h = np.ones_like(free_spectral_grid.energies)
    detail = certified_IM_bound(h, free_spectral_grid, free_partition, 3.0, 20.0, free_sched, 1)
    assert detail.source == "van_der_corput"
    assert detail.pieces >= 1


def test_fuzzed_bounds_hold(free_spectral_grid, free_partition, free_sched):
    results = fuzz_bounds(free_spectral_grid, free_partition, free_sched, 1, trials=25, seed=0,
                          M_max=20.0, t_max=10.0)
    assert len(results) == 25
    assert sum(r.violated for r in results) == 0


def test_random_amplitude_is_capped():
    rng = np.random.default_rng(3)
    E = np.linspace(-2.5, 2.5, 200)
    for _ in range(20):
        h = random_amplitude(E, rng)
        assert np.all(np.abs(h) <= H_CAP)
        assert np.all(np.abs(np.diff(h) / np.diff(E)) <= H_CAP + 1e-9)


def test_integral_validates_amplitude(free_spectral_grid):
    with pytest.raises(ValueError):
        spectral_osc_integral(np.ones(3), 0.0, 0.0, free_spectral_grid)
    h = np.ones_like(free_spectral_grid.energies)
    h[5] = np.nan
    with pytest.raises(ValueError):
        spectral_osc_integral(h, 0.0, 0.0, free_spectral_grid)


@pytest.mark.parametrize("t", [1.0, 5.0])
def test_free_integral_is_bessel(free_spectral_grid, t):
    h = np.ones_like(free_spectral_grid.energies)
    direct = spectral_osc_integral(h, 0.0, t, free_spectral_grid).direct
    assert abs(direct - math.pi * special.j0(2.0 * t)) <= 1e-4


# ===============================
# Acceptance size, ε₀ = 1e-3
# ===============================

@pytest.mark.slow
@pytest.mark.parametrize("M, t", [(0, 0.0), (1, 5.0), (5, 20.0), (0, 20.0)])
def test_cosine_integral_within_bound(cosine_spectral_grid, cosine_partition, cosine_sched, M, t):
    h = np.ones_like(cosine_spectral_grid.energies)
    result = spectral_osc_integral(h, M, t, cosine_spectral_grid, cosine_partition, cosine_sched, 2)
    assert not result.violated


@pytest.mark.slow
def test_cosine_fuzzed_bounds_hold(cosine_spectral_grid, cosine_partition, cosine_sched):
    results = fuzz_bounds(cosine_spectral_grid, cosine_partition, cosine_sched, 2,
                          trials=300, seed=0)
    assert len(results) == 300
    assert sum(r.violated for r in results) == 0
