"""
Small-data DNLS  i q̇_n = (H_θ q)_n ± |q_n|^{p-1} q_n.

Functions:
    nls_evolve: Strang splitting, exact nonlinear phase half-steps around a Chebyshev linear step
    convolution_constant: empirical C₁ = sup ⟨t⟩^ζ ∫₀^∞ ⟨t-s⟩^{-ζ}⟨s⟩^{-μ} ds
    linear_decay_constant: empirical K₁ = sup ⟨t⟩^ζ ‖e^{-itH}φ̂‖∞ with ‖φ̂‖₁ = 1
    bootstrap_run / bootstrap_check: the decay bootstrap at δ₀ = δ*/10
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from qpdl.errors import NumericalContractError
from qpdl.modules.lattice_operator import LatticeState
from qpdl.modules.potential import FourierSeries, sup_bound
from qpdl.modules.propagator import ChebyshevPropagator, decay_profile, japanese, required_window
from qpdl.modules.torus_freq import Frequency

logger = logging.getLogger(__name__)

DEFAULT_P = 6
DEFAULT_ZETA = 0.3
DRIFT_PER_UNIT_TIME = 1e-6
CONVOLUTION_HORIZON = 1e8


@dataclass
class NlsTrajectory:
    times: np.ndarray
    states: List[LatticeState]
    sup_norms: np.ndarray
    l2_norms: np.ndarray
    chain_ok: np.ndarray
    N: int

    @property
    def l2_drift(self) -> float:
        if self.l2_norms.size == 0 or self.l2_norms[0] == 0:
            return 0.0
        return float(np.abs(self.l2_norms / self.l2_norms[0] - 1.0).max())


@dataclass
class NlsRun:
    p: int
    sign: int
    zeta: float
    delta0: float
    K1: float
    C1: float
    delta_star: float
    trajectory: NlsTrajectory
    window_flag: bool = False

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times

    @property
    def weighted_sup(self) -> np.ndarray:
        return japanese(self.times) ** self.zeta * self.trajectory.sup_norms


def nonlinear_half_step(values: np.ndarray, p: float, sign: int, dt: float) -> np.ndarray:
    """q ↦ q e^{∓i|q|^{p-1}dt/2}; |q_n| is unchanged site by site."""
    return values * np.exp(-1j * sign * np.abs(values) ** (p - 1) * dt / 2.0)


def max_step(phi: LatticeState, p: float, V: FourierSeries) -> float:
    return 0.1 / (2.0 + sup_bound(V) + phi.sup() ** (p - 1))


def _record_steps(n_steps: int, dt: float, record_times: Optional[Sequence[float]]) -> List[int]:
    if record_times is None:
        every = max(1, n_steps // 200)
        steps = list(range(0, n_steps + 1, every))
    else:
        steps = [int(round(t / dt)) for t in record_times if 0 <= t <= n_steps * dt + 1e-12]
    if n_steps not in steps:
        steps.append(n_steps)
    return sorted(set(min(s, n_steps) for s in steps))


def nls_evolve(phi: LatticeState, p: float, sign: int, t_final: float, dt: float,
               V: FourierSeries, theta, freq: Frequency,
               record_times: Optional[Sequence[float]] = None,
               linear: bool = True) -> NlsTrajectory:
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if sign not in (-1, 1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if t_final < 0 or dt <= 0:
        raise ValueError("need t_final >= 0 and dt > 0")
    limit = max_step(phi, p, V)
    if dt > limit:
        raise ValueError(f"dt={dt} exceeds the stable step {limit:.4g}")

    N = max(phi.N, required_window(t_final, V)) if linear else phi.N
    values = phi.resized(N).values
    prop = ChebyshevPropagator(V, theta, freq, N) if linear else None

    n_steps = int(math.ceil(t_final / dt - 1e-9))
    if n_steps:
        dt = t_final / n_steps
    records = _record_steps(n_steps, dt, record_times)

    norm0 = float(np.linalg.norm(values))
    times, states, sups, l2s, chain = [], [], [], [], []
    next_record = 0

    for step in range(n_steps + 1):
        if next_record < len(records) and step == records[next_record]:
            t = step * dt
            l2 = float(np.linalg.norm(values))
            sup = float(np.abs(values).max())
            nonlinear_l1 = float(np.sum(np.abs(values) ** p))
            chain.append(nonlinear_l1 <= sup ** (p - 2) * l2 ** 2 * (1.0 + 1e-12) + 1e-300)
            if norm0 > 0 and abs(l2 / norm0 - 1.0) > DRIFT_PER_UNIT_TIME * max(t, 1.0):
                raise NumericalContractError(
                    "l2_drift", f"relative drift {abs(l2 / norm0 - 1.0):.2e} at t={t:.4g}; lower dt"
                )
            times.append(t)
            states.append(LatticeState(values.copy()))
            sups.append(sup)
            l2s.append(l2)
            next_record += 1
        if step == n_steps:
            break
        values = nonlinear_half_step(values, p, sign, dt)
        if prop is not None:
            values = prop.apply(values, dt)
        values = nonlinear_half_step(values, p, sign, dt)

    logger.debug("NLS p=%s: %d steps of %.4g, %d records", p, n_steps, dt, len(times))
    return NlsTrajectory(times=np.asarray(times), states=states, sup_norms=np.asarray(sups),
                         l2_norms=np.asarray(l2s), chain_ok=np.asarray(chain, dtype=bool), N=N)


# ===============================
# Constants of the bootstrap
# ===============================

def convolution_integral(t: float, zeta: float, mu: float,
                         horizon: float = CONVOLUTION_HORIZON) -> float:
    """∫₀^∞ ⟨t-s⟩^{-ζ}⟨s⟩^{-μ} ds; beyond the horizon S the integrand is ~ s^{-ζ-μ}."""

    def f(s):
        return (1.0 + (t - s) ** 2) ** (-zeta / 2.0) * (1.0 + s * s) ** (-mu / 2.0)

    total = 0.0
    edges = [0.0]
    if t > 0:
        edges.append(t)
    start = max(2.0 * t, 1.0)
    S = max(horizon, 1e3 * start)
    edges.extend(np.geomspace(start, S, 60).tolist())

    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            value, _ = integrate.quad(f, lo, hi, limit=200, epsabs=1e-13, epsrel=1e-11)
            total += value
    total += S ** (1.0 - zeta - mu) / (zeta + mu - 1.0)
    return total


def convolution_constant(zeta: float, mu: float, t_samples: Sequence[float]) -> float:
    if not 0.0 < zeta <= 1.0:
        raise ValueError(f"zeta must be in (0, 1], got {zeta}")
    if mu <= 1.0:
        raise ValueError(f"mu must exceed 1, got {mu}")
    samples = np.asarray(t_samples, dtype=float)
    if samples.size == 0:
        raise ValueError("t_samples must be non-empty")
    values = [japanese(t) ** zeta * convolution_integral(float(t), zeta, mu) for t in samples]
    return float(max(values))


def linear_decay_constant(shape: LatticeState, zeta: float, times: Sequence[float],
                          V: FourierSeries, theta, freq: Frequency) -> Tuple[float, bool]:
    """(sup_t ⟨t⟩^ζ ‖e^{-itH} φ̂‖∞ for φ̂ = shape/‖shape‖₁, whether the horizon was cut short)."""
    l1 = shape.l1()
    if l1 == 0:
        raise ValueError("shape must be non-zero")
    profile = decay_profile(shape.scaled(1.0 / l1), list(times), V, theta, freq)
    if profile.times.size == 0:
        raise NumericalContractError("wavefront_margin", "no safe times for the linear decay constant")
    K1 = float((japanese(profile.times) ** zeta * profile.sup_norms).max())
    return K1, profile.boundary_reached


def delta_star(C1: float, K1: float, p: float) -> float:
    """(C₁ (4K₁)^{p-2})^{-1/(p-1)}."""
    return (C1 * (4.0 * K1) ** (p - 2)) ** (-1.0 / (p - 1))


def bootstrap_run(shape: LatticeState, V: FourierSeries, theta, freq: Frequency,
                  p: int = DEFAULT_P, zeta: float = DEFAULT_ZETA, sign: int = 1,
                  t_final: float = 500.0, dt: Optional[float] = None,
                  delta0: Optional[float] = None, record_times: Optional[Sequence[float]] = None
                  ) -> NlsRun:
    """Measure K₁ and C₁, scale the datum to δ₀ (default δ*/10) and integrate."""
    if not 1.0 / (p - 2) < zeta < 1.0 / 3.0:
        logger.warning("zeta=%.3g outside (1/(p-2), 1/3) for p=%s", zeta, p)

    if record_times is None:
        record_times = np.concatenate([[0.0], np.geomspace(1.0, t_final, 40)]) if t_final >= 1 \
            else np.array([0.0, t_final])
    record_times = np.asarray(record_times, dtype=float)

    K1, window_flag = linear_decay_constant(shape, zeta, record_times, V, theta, freq)
    C1 = convolution_constant(zeta, zeta * (p - 2), record_times)
    d_star = delta_star(C1, K1, p)
    delta0 = d_star / 10.0 if delta0 is None else delta0
    if not 0.0 <= delta0 < d_star:
        raise ValueError(f"delta0={delta0:.4g} must lie in [0, delta*={d_star:.4g})")

    l1 = shape.l1()
    phi = shape.scaled(delta0 / l1) if l1 > 0 else shape
    step = max_step(phi, p, V) if dt is None else dt

    trajectory = nls_evolve(phi, p, sign, t_final, step, V, theta, freq, record_times)
    logger.info("Bootstrap: K1=%.4g C1=%.4g delta*=%.4g delta0=%.4g", K1, C1, d_star, delta0)
    return NlsRun(p=p, sign=sign, zeta=zeta, delta0=delta0, K1=K1, C1=C1, delta_star=d_star,
                  trajectory=trajectory, window_flag=window_flag)


def bootstrap_check(run: NlsRun) -> Tuple[bool, float]:
    """passes iff sup ⟨t⟩^ζ‖q(t)‖∞ <= 4K₁δ₀; margin is their ratio."""
    if not run.delta0 < run.delta_star:
        raise ValueError(f"delta0={run.delta0:.4g} is not below delta*={run.delta_star:.4g}; "
                         "the bootstrap does not apply")
    if run.delta0 == 0 or run.trajectory.sup_norms.size == 0 or run.trajectory.sup_norms.max() == 0:
        return True, 0.0
    if run.window_flag:
        logger.warning("bootstrap verdict covers the available horizon only")
    measured = float(run.weighted_sup.max())
    margin = measured / (4.0 * run.K1 * run.delta0)
    return margin <= 1.0, margin
