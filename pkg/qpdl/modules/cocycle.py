"""
Schrödinger cocycle (ω, A₀(E) + F₀(θ)) with A₀ = [[-E, -1], [1, 0]] and
F₀ = [[V(θ), 0], [0, 0]]: transfer matrices, Lyapunov exponent, fibered
rotation number.

The rotation number follows the continuous lift of the projective action
(θ, φ) ↦ (θ + ω, φ̃(θ, φ)). Lines are represented by angles in
[-π/2, π/2); for a Schrödinger matrix the image of (cos φ, sin φ) has
second component cos φ >= 0, so its atan2 angle lies in [0, π] and the
lift increment is atan2(cos φ, a cos φ - sin φ) - φ. With this lift
ρ₀(E) = arccos(-E/2) for V = 0, ρ = 0 below the spectrum and ρ = π above.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from qpdl.modules.potential import FourierSeries, eval_potential, orbit_values
from qpdl.modules.torus_freq import Frequency

logger = logging.getLogger(__name__)

RENORMALIZE_EVERY = 32
LOG_SCALE_THRESHOLD = 1e100
TAIL_WINDOWS = np.linspace(0.9, 1.0, 11)

SL2 = np.ndarray


@dataclass(frozen=True)
class RotationEstimate:
    value: float
    iterations: int
    oscillation: float


@dataclass(frozen=True)
class CocycleProduct:
    """The product equals exp(log_scale) * matrix."""
    matrix: np.ndarray
    log_scale: float = 0.0

    @property
    def value(self) -> np.ndarray:
        return np.exp(self.log_scale) * self.matrix


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    noisy: bool


def A0(E: float) -> SL2:
    return np.array([[-E, -1.0], [1.0, 0.0]])


def transfer_matrix(E: float, V: FourierSeries, theta) -> SL2:
    return np.array([[-E + eval_potential(V, theta), -1.0], [1.0, 0.0]])


def cocycle_product(E: float, V: FourierSeries, theta, freq: Frequency, n: int) -> CocycleProduct:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")

    diagonal = -E + orbit_values(V, theta, freq.vector, np.arange(n))
    product = np.eye(2)
    log_scale = 0.0

    for j, a in enumerate(diagonal, start=1):
        product = np.array([[a, -1.0], [1.0, 0.0]]) @ product
        if j % RENORMALIZE_EVERY == 0 or j == n:
            det = product[0, 0] * product[1, 1] - product[0, 1] * product[1, 0]
            if det > 0:
                product /= np.sqrt(det)
            size = np.abs(product).max()
            if size > LOG_SCALE_THRESHOLD:
                product /= size
                log_scale += np.log(size)

    return CocycleProduct(product, log_scale)


def _bump_weights(n: int) -> np.ndarray:
    """(n, len(TAIL_WINDOWS)) weights of the tail-window weighted Birkhoff averages."""
    weights = np.zeros((n, len(TAIL_WINDOWS)))
    for i, frac in enumerate(TAIL_WINDOWS):
        length = max(2, int(round(frac * n)))
        s = (np.arange(length) + 0.5) / length
        w = np.exp(-1.0 / (s * (1.0 - s)))
        weights[:length, i] = w / w.sum()
    return weights


def rotation_numbers(energies: Sequence[float], V: FourierSeries, theta, freq: Frequency,
                     n_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Weighted Birkhoff averages of the lift increments for many energies.

    Returns (values in [0, π], oscillation) where the oscillation is the
    spread of the averages taken over windows ending in the last decade.
    """
    if n_max < 10:
        raise ValueError(f"n_max must be >= 10, got {n_max}")
    energies = np.asarray(energies, dtype=float)
    orbit = orbit_values(V, theta, freq.vector, np.arange(n_max))
    weights = _bump_weights(n_max)

    phi = np.zeros_like(energies)
    sums = np.zeros((len(TAIL_WINDOWS), energies.size))
    half_pi = 0.5 * np.pi

    for j in range(n_max):
        a = orbit[j] - energies
        c, s = np.cos(phi), np.sin(phi)
        image = np.arctan2(c, a * c - s)
        sums += weights[j][:, None] * (image - phi)[None, :]
        phi = image - np.pi * (image > half_pi)

    values = np.clip(sums[-1], 0.0, np.pi)
    oscillation = sums.max(axis=0) - sums.min(axis=0)
    return values, oscillation


def rotation_number(E: float, V: FourierSeries, theta, freq: Frequency,
                    n_max: int = 100_000) -> RotationEstimate:
    if n_max < 1000:
        raise ValueError(f"n_max must be >= 1000, got {n_max}")
    values, osc = rotation_numbers([E], V, theta, freq, n_max)
    return RotationEstimate(value=float(values[0]), iterations=n_max, oscillation=float(osc[0]))


def lyapunov_exponents(energies: Sequence[float], V: FourierSeries, theta, freq: Frequency,
                       n_max: int, phases: int = 8) -> np.ndarray:
    if n_max < 100:
        raise ValueError(f"n_max must be >= 100, got {n_max}")
    energies = np.asarray(energies, dtype=float)
    theta = np.asarray(theta, dtype=float).reshape(freq.d)

    shifts = 2.0 * np.pi * np.arange(phases) / phases
    orbits = np.stack([
        orbit_values(V, theta + shift, freq.vector, np.arange(n_max)) for shift in shifts
    ])

    x = np.ones((phases, energies.size))
    y = np.zeros((phases, energies.size))
    growth = np.zeros((phases, energies.size))

    for j in range(n_max):
        a = orbits[:, j][:, None] - energies[None, :]
        x, y = a * x - y, x
        r = np.hypot(x, y)
        growth += np.log(r)
        x /= r
        y /= r

    return np.maximum(growth.mean(axis=0) / n_max, 0.0)


def lyapunov_exponent(E: float, V: FourierSeries, theta, freq: Frequency,
                      n_max: int = 10_000, phases: int = 8) -> float:
    return float(lyapunov_exponents([E], V, theta, freq, n_max, phases)[0])


def rho_derivative(E: float, V: FourierSeries, theta, freq: Frequency, h_step: float,
                   n_max: int = 20_000) -> DerivativeEstimate:
    if h_step <= 0:
        raise ValueError(f"h_step must be positive, got {h_step}")

    values, osc = rotation_numbers([E - h_step, E + h_step], V, theta, freq, n_max)
    slope = max(0.0, float(values[1] - values[0]) / (2.0 * h_step))
    noisy = bool(osc.max() > h_step * slope)
    if noisy:
        logger.warning("rho'(%.6f) = %.4g is noisy (oscillation %.2e)", E, slope, osc.max())
    return DerivativeEstimate(value=slope, noisy=noisy)
