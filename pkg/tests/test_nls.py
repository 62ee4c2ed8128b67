import math

import numpy as np
import pytest
from scipy import special

from qpdl.modules.lattice_operator import LatticeState
from qpdl.modules.nls import (
    NlsRun,
    NlsTrajectory,
    bootstrap_check,
    bootstrap_run,
    convolution_constant,
    convolution_integral,
    delta_star,
    max_step,
    nls_evolve,
    nonlinear_half_step,
)
from qpdl.modules.propagator import evolve, required_window


def test_half_step_keeps_moduli():
    q = LatticeState.random(10, 10, seed=2).values
    out = nonlinear_half_step(q, 3, 1, 0.1)
    np.testing.assert_allclose(np.abs(out), np.abs(q), rtol=1e-14)


def test_pure_nonlinear_flow_is_a_phase_rotation(free, golden):
    phi = LatticeState.random(5, 5, seed=7).scaled(0.3)
    traj = nls_evolve(phi, 3, -1, 2.0, 0.01, free, 0.0, golden, record_times=[2.0], linear=False)
    expected = phi.values * np.exp(1j * np.abs(phi.values) ** 2 * 2.0)
    np.testing.assert_allclose(traj.states[-1].values, expected, atol=1e-12)


def test_tiny_datum_follows_linear_flow(mathieu, golden):
    phi = LatticeState.delta(5).scaled(1e-3)
    traj = nls_evolve(phi, 6, 1, 10.0, 0.04, mathieu, 0.0, golden, record_times=[10.0])
    linear = evolve(phi.resized(traj.N), 10.0, mathieu, 0.0, golden)
    np.testing.assert_allclose(traj.states[-1].values, linear.values, atol=1e-12)


@pytest.mark.parametrize("sign", [1, -1])
def test_mass_conserved(mathieu, golden, sign):
    phi = LatticeState.gaussian(10, 2.0).scaled(0.5)
    traj = nls_evolve(phi, 3, sign, 20.0, 0.02, mathieu, 0.0, golden)
    assert traj.l2_drift <= 1e-9
    assert traj.chain_ok.all()
    assert traj.N >= required_window(20.0, mathieu)
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(20.0)


def test_zero_datum_stays_zero(free, golden):
    traj = nls_evolve(LatticeState.delta(5).scaled(0.0), 4, 1, 5.0, 0.01, free, 0.0, golden)
    assert not traj.sup_norms.any()


def test_parameter_validation(free, golden):
    phi = LatticeState.delta(5).scaled(0.1)
    with pytest.raises(ValueError):
        nls_evolve(phi, 1, 1, 1.0, 0.01, free, 0.0, golden)
    with pytest.raises(ValueError):
        nls_evolve(phi, 3, 0, 1.0, 0.01, free, 0.0, golden)
    with pytest.raises(ValueError):
        nls_evolve(phi, 3, 1, 1.0, 2 * max_step(phi, 3, free), free, 0.0, golden)


def test_convolution_integral_at_origin():
    expected = math.sqrt(math.pi) * special.gamma(0.25) / (2.0 * special.gamma(0.75))
    assert convolution_integral(0.0, 0.3, 1.2) == pytest.approx(expected, rel=1e-6)


def test_convolution_constant_is_finite_and_grows_with_samples():
    few = convolution_constant(0.3, 1.2, [0.0, 1.0])
    many = convolution_constant(0.3, 1.2, [0.0, 1.0, 10.0, 100.0])
    assert 0 < few <= many < math.inf


@pytest.mark.parametrize("zeta, mu, samples", [(0.0, 1.2, [1.0]), (0.3, 1.0, [1.0]), (0.3, 1.2, [])])
def test_convolution_constant_validation(zeta, mu, samples):
    with pytest.raises(ValueError):
        convolution_constant(zeta, mu, samples)


def test_delta_star_formula():
    assert delta_star(2.0, 0.25, 3) == pytest.approx(1.0 / math.sqrt(2.0))


def test_free_bootstrap_passes(free, golden):
    run = bootstrap_run(LatticeState.delta(5), free, 0.0, golden, t_final=50.0)
    assert run.K1 >= 1.0
    assert run.delta0 == pytest.approx(run.delta_star / 10.0)
    assert not run.window_flag
    passes, margin = bootstrap_check(run)
    assert passes
    assert 0 < margin <= 0.5
    assert run.trajectory.l2_drift <= 1e-8


def test_zero_run_passes_trivially():
    traj = NlsTrajectory(times=np.array([0.0]), states=[LatticeState.delta(1).scaled(0.0)],
                         sup_norms=np.zeros(1), l2_norms=np.zeros(1),
                         chain_ok=np.ones(1, dtype=bool), N=1)
    run = NlsRun(p=6, sign=1, zeta=0.3, delta0=0.0, K1=1.0, C1=1.0, delta_star=1.0,
                 trajectory=traj)
    assert bootstrap_check(run) == (True, 0.0)


def test_convolution_constant_stable_under_refinement():
    coarse = convolution_constant(0.3, 1.2, np.geomspace(1.0, 500.0, 20))
    fine = convolution_constant(0.3, 1.2, np.geomspace(1.0, 500.0, 80))
    assert fine == pytest.approx(coarse, rel=0.02)
    t = 50.0
    assert convolution_integral(t, 0.3, 1.2, horizon=1e10) == pytest.approx(
        convolution_integral(t, 0.3, 1.2), rel=1e-6)


def test_convolution_integral_closed_form():
    # ζ + μ = 2 at t = 0 leaves ∫₀^∞ (1 + s²)^{-1} ds
    assert convolution_integral(0.0, 0.5, 1.5) == pytest.approx(math.pi / 2.0, rel=1e-8)


def test_convolution_constant_non_increasing_in_mu():
    samples = [0.0, 1.0, 10.0, 100.0]
    values = [convolution_constant(0.3, mu, samples) for mu in (1.1, 1.2, 1.5, 2.0)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_strang_splitting_is_second_order(mathieu, golden):
    phi = LatticeState.gaussian(10, 2.0)

    def terminal(dt):
        traj = nls_evolve(phi, 3, 1, 5.0, dt, mathieu, 0.0, golden, record_times=[5.0])
        return traj.states[-1].values

    reference = terminal(0.00125)
    coarse = np.abs(terminal(0.02) - reference).max()
    fine = np.abs(terminal(0.01) - reference).max()
    assert 3.0 <= coarse / fine <= 5.0


def test_bootstrap_rejects_datum_above_threshold(free, golden):
    with pytest.raises(ValueError):
        bootstrap_run(LatticeState.delta(5), free, 0.0, golden, t_final=20.0, delta0=10.0)

    traj = NlsTrajectory(times=np.array([0.0]), states=[LatticeState.delta(1).scaled(0.5)],
                         sup_norms=np.array([0.5]), l2_norms=np.array([0.5]),
                         chain_ok=np.ones(1, dtype=bool), N=1)
    run = NlsRun(p=6, sign=1, zeta=0.3, delta0=0.5, K1=1.0, C1=1.0, delta_star=0.4,
                 trajectory=traj)
    with pytest.raises(ValueError):
        bootstrap_check(run)


def test_halving_datum_does_not_raise_margin(mathieu, golden):
    full = bootstrap_run(LatticeState.delta(5), mathieu, 0.0, golden, t_final=50.0)
    half = bootstrap_run(LatticeState.delta(5), mathieu, 0.0, golden, t_final=50.0,
                         delta0=full.delta_star / 20.0)
    assert half.delta0 == pytest.approx(full.delta0 / 2.0)
    _, margin_full = bootstrap_check(full)
    _, margin_half = bootstrap_check(half)
    assert margin_half <= margin_full * (1.0 + 1e-9)


# ===============================
# Acceptance size, ε = 0.01
# ===============================

@pytest.mark.slow
def test_mass_drift_over_long_horizon(mathieu, golden):
    phi = LatticeState.delta(5).scaled(1e-2)
    traj = nls_evolve(phi, 6, 1, 500.0, max_step(phi, 6, mathieu), mathieu, 0.0, golden)
    assert traj.times[-1] == pytest.approx(500.0)
    assert traj.l2_drift <= 1e-8
    assert traj.chain_ok.all()


@pytest.mark.slow
def test_cosine_bootstrap_passes(mathieu, golden):
    run = bootstrap_run(LatticeState.delta(5), mathieu, 0.0, golden, t_final=500.0)
    assert run.delta0 == pytest.approx(run.delta_star / 10.0)
    assert not run.window_flag
    passes, margin = bootstrap_check(run)
    assert passes
    assert margin <= 0.5
    assert run.trajectory.l2_drift <= 1e-8
