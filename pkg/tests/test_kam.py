import math

import numpy as np
import pytest

from qpdl.errors import KamStepError, NumericalContractError
from qpdl.modules.cocycle import rho_derivative, rotation_number, rotation_numbers
from qpdl.modules.kam import (
    initial_state,
    kam_step,
    nonresonance_check,
    normal_form,
    partition_spectrum,
    reduce,
    resonant_rotation,
    rotation,
    schedule,
    schedule_for,
    xi_derivative_diagnostics,
)
from qpdl.modules.potential import cosine
from qpdl.modules.torus_freq import dist_mod_pi, half_resonance, norm1


# ===============================
# Schedule and non-resonance
# ===============================

def test_schedule_first_order_from_formula():
    sched = schedule(math.exp(-200.0), 1, N_min=1)
    assert sched.orders_raw[0] == pytest.approx(4.0)
    assert sched.orders[0] == 4


def test_schedule_epsilon_recursion():
    sched = schedule(1e-4, 3, 20)
    assert sched.epsilons[1] == pytest.approx(10 ** -4.02, rel=1e-12)
    for j, eps in enumerate(sched.epsilons):
        assert eps == pytest.approx(1e-4 ** (1.005 ** j), rel=1e-12)
    assert all(b < a for a, b in zip(sched.epsilons, sched.epsilons[1:]))


def test_schedule_floor(sched_small):
    assert sched_small.orders == (20, 20)
    assert all(raw < 1 for raw in sched_small.orders_raw)


@pytest.mark.parametrize("eps0", [0.0, 1.0, 2.0])
def test_schedule_rejects_out_of_range(eps0):
    with pytest.raises(ValueError):
        schedule(eps0, 2, 20)


def test_exact_half_resonance_is_flagged(golden):
    ok, k = nonresonance_check(half_resonance([3], golden), 1e-4, 10, golden, band_scale=0.1)
    assert not ok
    assert tuple(k) == (3,)


def test_band_centre_is_non_resonant(golden):
    ok, k = nonresonance_check(math.pi / 2, 1e-4, 10, golden, band_scale=0.1)
    assert ok and k is None


def test_inside_half_band_is_flagged(golden):
    eps = 1e-4
    rho = half_resonance([2], golden) + 0.5 * eps ** (1 / 200) / 2 ** 2
    ok, _ = nonresonance_check(rho, eps, 10, golden)
    assert not ok


# ===============================
# Single steps
# ===============================

def test_normal_form_of_rotation():
    alpha, P = normal_form(rotation(0.7))
    assert alpha == pytest.approx(0.7)
    np.testing.assert_allclose(np.linalg.inv(P) @ rotation(0.7) @ P, rotation(0.7), atol=1e-12)
    assert normal_form(rotation(-0.7))[0] == pytest.approx(-0.7)


def test_step_without_perturbation_is_identity(free, golden, sched_small):
    state = initial_state(0.4, free, golden, sched_small)
    new = kam_step(state, sched_small, 0)
    np.testing.assert_allclose(new.A, state.A, atol=1e-15)
    np.testing.assert_allclose(new.F_samples, 0.0, atol=1e-15)
    np.testing.assert_allclose(new.Z_samples, state.Z_samples, atol=1e-15)


def test_step_contracts_quadratically(small_cosine, golden, sched_small):
    state = initial_state(0.0, small_cosine, golden, sched_small)
    ok, _ = nonresonance_check(state.xi, sched_small.epsilons[0], 20, golden, band_scale=0.1)
    assert ok

    new = kam_step(state, sched_small, 0)
    record = new.steps[-1]
    assert record.norm_after <= 1e-3 ** 1.5
    assert record.norm_after < record.norm_before
    assert record.residual <= 1e-8
    assert abs(np.linalg.det(new.A) - 1.0) <= 1e-10


def test_zero_rotation_is_identity(small_cosine, golden, sched_small):
    state = initial_state(0.0, small_cosine, golden, sched_small)
    assert resonant_rotation(state, [0]) is state


def test_free_resonant_rotation_lands_on_zero(free, golden, sched_small):
    h1 = half_resonance([1], golden)
    state = initial_state(-2.0 * math.cos(h1), free, golden, sched_small)
    assert state.xi == pytest.approx(h1, abs=1e-12)

    new = resonant_rotation(state, [1], sched_small, 0)
    assert new.xi == pytest.approx(0.0, abs=1e-10)
    assert new.history == [(1,)]
    assert new.rho == pytest.approx(h1, abs=1e-10)


def test_rotation_keeps_rho(small_cosine, golden):
    sched = schedule(1e-3, 0, 20)
    state = initial_state(0.0, small_cosine, golden, sched)
    new = resonant_rotation(state, [3], sched, 0)
    assert dist_mod_pi(new.xi + half_resonance([3], golden), state.xi) <= 1e-10
    assert dist_mod_pi(new.rho, state.rho) <= 1e-10


def test_rotation_into_another_band_aborts(small_cosine, golden, sched_small):
    # π/2 - 3ω/2 lands inside the k = 1 band
    state = initial_state(0.0, small_cosine, golden, sched_small)
    with pytest.raises(KamStepError) as info:
        resonant_rotation(state, [3], sched_small, 0)
    assert info.value.contract == "kam_step"
    assert info.value.k == (1,)


# ===============================
# Full reduction
# ===============================

@pytest.mark.parametrize("E", [-1.5, -0.3, 0.0, 1.2, 1.9])
def test_free_reduction_is_trivial(free, golden, E):
    sched = schedule_for(free, 2)
    state = reduce(E, free, golden, sched, 2)
    assert state.rho == pytest.approx(math.acos(-E / 2), abs=1e-12)
    assert state.layer == 0
    assert state.F_norm() == pytest.approx(0.0, abs=1e-14)


def test_reduction_matches_rotation_number(small_cosine, golden):
    sched = schedule_for(small_cosine, 2)
    state = reduce(0.0, small_cosine, golden, sched, 2)
    estimate = rotation_number(0.0, small_cosine, 0.0, golden, n_max=100_000)
    assert abs(state.rho - estimate.value) <= 1e-4
    assert all(s.norm_after < s.norm_before for s in state.steps)
    assert all(s.residual <= 1e-8 for s in state.steps)


def test_reduction_in_first_gap(golden):
    V = cosine(0.05)
    sched = schedule_for(V, 2)
    h1 = half_resonance([1], golden)
    state = reduce(-2.0 * math.cos(h1), V, golden, sched, 2)
    assert state.alpha_imaginary
    assert state.rho == pytest.approx(h1, abs=1e-6)
    assert state.layer == 1
    for j, k in enumerate(state.resonances):
        assert 0 < norm1(k) <= sched.orders[j]


def test_reduction_rejects_large_potential(golden):
    V = cosine(0.5)
    with pytest.raises(ValueError):
        reduce(0.0, V, golden, schedule(0.1, 1, 20), 1)


# ===============================
# Partition
# ===============================

def test_free_partition_is_one_layer_zero_component(free, golden):
    sched = schedule_for(free, 2)
    partition = partition_spectrum(free, golden, sched, 2, np.linspace(-2.5, 2.5, 41))
    assert partition.component_count == 1
    assert partition.intervals[0].layer == 0
    assert partition.within_bound


def test_cosine_partition_layers(golden):
    V = cosine(0.05)
    sched = schedule_for(V, 1)
    energies = np.arange(-2.2, 2.2 + 1e-9, 1e-2)
    partition = partition_spectrum(V, golden, sched, 1, energies)

    assert partition.component_count >= 3
    layers = [iv.layer for iv in partition.intervals]
    assert layers[0] == 0 and layers[-1] == 0
    assert 1 in layers
    for a, b in zip(partition.intervals, partition.intervals[1:]):
        assert a.upper == pytest.approx(b.lower)
        assert a.layer != b.layer
    assert partition.layer_measure[1]["measured"] > 0


# ===============================
# Derivative diagnostics
# ===============================

def _stencil(E, h, V, freq, sched, J):
    return [reduce(E + i * h, V, freq, sched, J) for i in range(-2, 3)]


def test_free_xi_identity(free, golden):
    sched = schedule_for(free, 2)
    diag = xi_derivative_diagnostics(_stencil(0.0, 1e-3, free, golden, sched, 2))
    assert diag.xi_prime == pytest.approx(0.5, abs=1e-8)
    assert diag.identity_error <= 1e-8
    assert diag.window_ok
    assert not diag.sin_flag


def test_layer_zero_xi_derivative_matches_rho_derivative(small_cosine, golden):
    sched = schedule_for(small_cosine, 2)
    diag = xi_derivative_diagnostics(_stencil(0.0, 1e-3, small_cosine, golden, sched, 2))
    assert diag.identity_error <= 1e-3
    slope = rho_derivative(0.0, small_cosine, 0.0, golden, 1e-2, n_max=100_000)
    assert abs(diag.xi_prime - slope.value) <= 5e-3


def test_sin_band_flag_near_band_edge(free, golden):
    sched = schedule_for(free, 2)
    diag = xi_derivative_diagnostics(_stencil(2.0 - 1e-4, 1e-5, free, golden, sched, 2))
    assert diag.sin_flag
    assert diag.sin_band < diag.sin_band_formula


def test_uneven_stencil_rejected(free, golden):
    sched = schedule_for(free, 1)
    states = [reduce(E, free, golden, sched, 1) for E in (0.0, 0.1, 0.15, 0.3, 0.4)]
    with pytest.raises(ValueError):
        xi_derivative_diagnostics(states)


def test_plateau_window_bounds_on_free_stencils(free, golden):
    sched = schedule(1e-6, 2)
    # |ξ″|·4 sin³ξ = E/2 for V = 0, against ε₀^{3σ/4} ≈ 0.95
    steep = xi_derivative_diagnostics(_stencil(1.95, 1e-4, free, golden, sched, 2))
    assert steep.xi_prime == pytest.approx(1.0 / math.sqrt(4.0 - 1.95 ** 2), rel=1e-6)
    assert steep.window_ok
    assert steep.second_window_ok
    assert not steep.window_applies

    flat = xi_derivative_diagnostics(_stencil(0.5, 1e-3, free, golden, sched, 2))
    assert flat.window_ok
    assert not flat.second_window_ok


@pytest.mark.slow
def test_reduction_matches_rotation_number_across_spectrum(small_cosine, golden):
    sched = schedule_for(small_cosine, 2)
    energies = np.linspace(-1.9, 1.9, 51)
    values, oscillation = rotation_numbers(energies, small_cosine, 0.0, golden, 100_000)

    compared = 0
    for E, value, osc in zip(energies, values, oscillation):
        try:
            state = reduce(float(E), small_cosine, golden, sched, 2)
        except NumericalContractError:
            continue
        if state.alpha_imaginary or osc > 1e-5:
            continue
        assert abs(state.rho - value) <= 1e-4, f"E={E}"
        compared += 1
    assert compared >= 40
