"""
e^{-itH_θ} on a finite window by Chebyshev expansion.

With R = 2 + ‖V‖∞ the rescaled operator H/R has spectrum in [-1, 1] and

    e^{-itH} = Σ_k (2 - δ_{k0}) (-i)^k J_k(Rt) T_k(H/R),

so one application costs one three-term recurrence of length ~ eR|t|/2.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import special, stats

from qpdl.errors import WindowTooSmallError
from qpdl.modules.lattice_operator import LatticeState, hamiltonian_apply, potential_diagonal
from qpdl.modules.potential import FourierSeries, sup_bound
from qpdl.modules.spectral_transform import SpectralGrid, spectral_transform
from qpdl.modules.torus_freq import Frequency

logger = logging.getLogger(__name__)

COEFF_TAIL = 1e-15
TAIL_WARNING = 1e-13
ORDER_MARGIN = 30
WAVEFRONT_MARGIN = 50
EDGE_SITES = 10
EDGE_TOL = 1e-10
FIT_START = 10.0


def japanese(t) -> np.ndarray:
    """⟨t⟩ = (1 + t²)^{1/2}."""
    return np.sqrt(1.0 + np.asarray(t, dtype=float) ** 2)


def required_window(t: float, V: FourierSeries) -> int:
    return int(math.ceil(2.0 * (2.0 + sup_bound(V)) * abs(t))) + WAVEFRONT_MARGIN


def chebyshev_coefficients(a: float) -> np.ndarray:
    """(2 - δ_{k0})(-i)^k J_k(a), trimmed where the tail drops below COEFF_TAIL."""
    order = int(math.ceil(math.e * abs(a) / 2.0)) + ORDER_MARGIN
    k = np.arange(order + 1)
    coeffs = 2.0 * (-1j) ** k * special.jv(k, a)
    coeffs[0] *= 0.5

    big = np.nonzero(np.abs(coeffs) >= COEFF_TAIL)[0]
    last = int(big[-1]) if big.size else 0
    if last == order and abs(coeffs[-1]) > TAIL_WARNING:
        logger.warning("Chebyshev tail %.1e at order %d for Rt=%.3g", abs(coeffs[-1]), order, a)
    return coeffs[:last + 1]


class ChebyshevPropagator:
    """Reusable e^{-itH_θ} on [-N, N]; coefficients are cached per time step."""

    def __init__(self, V: FourierSeries, theta, freq: Frequency, N: int):
        if N < 2:
            raise ValueError(f"N must be >= 2, got {N}")
        self.V = V
        self.N = N
        self.radius = 2.0 + sup_bound(V)
        self.diagonal = potential_diagonal(V, theta, freq, N)
        self._cache: Dict[float, np.ndarray] = {}

    def coefficients(self, t: float) -> np.ndarray:
        if t not in self._cache:
            self._cache[t] = chebyshev_coefficients(self.radius * t)
        return self._cache[t]

    def apply(self, values: np.ndarray, t: float) -> np.ndarray:
        if t == 0.0:
            return values.copy()
        coeffs = self.coefficients(t)
        scaled = self.diagonal / self.radius

        def H(v):
            return _apply_scaled(scaled, v, self.radius)

        prev = values.astype(complex)
        out = coeffs[0] * prev
        if coeffs.size == 1:
            return out
        cur = H(prev)
        out += coeffs[1] * cur
        for c in coeffs[2:]:
            prev, cur = cur, 2.0 * H(cur) - prev
            out += c * cur
        return out

    def evolve(self, q0: LatticeState, t: float) -> LatticeState:
        needed = required_window(t, self.V)
        if q0.N < needed or self.N < needed:
            raise WindowTooSmallError(needed, min(q0.N, self.N))
        values = q0.resized(self.N).values
        return LatticeState(self.apply(values, float(t)))

    def energy(self, q: LatticeState) -> float:
        values = q.resized(self.N).values
        return float(np.vdot(values, hamiltonian_apply(self.diagonal, values)).real)


def _apply_scaled(scaled_diagonal: np.ndarray, v: np.ndarray, radius: float) -> np.ndarray:
    out = scaled_diagonal * v
    out[:-1] -= v[1:] / radius
    out[1:] -= v[:-1] / radius
    return out


def evolve(q0: LatticeState, t: float, V: FourierSeries, theta, freq: Frequency) -> LatticeState:
    return ChebyshevPropagator(V, theta, freq, q0.N).evolve(q0, t)


def free_evolution(N: int, t: float) -> np.ndarray:
    """e^{-itH}δ₀ for V = 0: q_n = i^n J_n(2t)."""
    n = np.arange(-N, N + 1)
    return (1j ** np.mod(n, 4)) * special.jv(n, 2.0 * t)


@dataclass
class DecayProfile:
    times: np.ndarray
    sup_norms: np.ndarray
    l2_norms: np.ndarray
    N: int
    slope: float
    intercept: float
    band: Tuple[float, float]
    boundary_reached: bool
    unitarity_drift: float

    @property
    def weighted_sup(self) -> np.ndarray:
        return self.sup_norms * japanese(self.times) ** (1.0 / 3.0)


def fit_decay(times: np.ndarray, sup_norms: np.ndarray) -> Tuple[float, float, Tuple[float, float]]:
    """Least-squares slope of log sup against log⟨t⟩ over t >= 10, with a 2σ band."""
    mask = (times >= FIT_START) & (sup_norms > 0)
    if mask.sum() < 3:
        raise ValueError(f"need at least 3 times >= {FIT_START} to fit a decay exponent")
    fit = stats.linregress(np.log(japanese(times[mask])), np.log(sup_norms[mask]))
    half = 2.0 * float(fit.stderr)
    return float(fit.slope), float(fit.intercept), (float(fit.slope) - half, float(fit.slope) + half)


def decay_profile(phi: LatticeState, times: Sequence[float], V: FourierSeries, theta,
                  freq: Frequency, N: Optional[int] = None) -> DecayProfile:
    times = np.asarray(sorted(float(t) for t in times))
    if times.size == 0 or times[0] < 0:
        raise ValueError("times must be a non-empty list of non-negative reals")
    N = max(required_window(times[-1], V), phi.N) if N is None else N
    if N < required_window(times[-1], V):
        raise WindowTooSmallError(required_window(times[-1], V), N)

    prop = ChebyshevPropagator(V, theta, freq, N)
    values = phi.resized(N).values
    norm0 = float(np.linalg.norm(values))

    sups, l2s, kept = [], [], []
    boundary = False
    current = 0.0
    for t in times:
        values = prop.apply(values, t - current)
        current = t
        edge = max(np.abs(values[:EDGE_SITES]).max(), np.abs(values[-EDGE_SITES:]).max())
        if edge > EDGE_TOL:
            boundary = True
            logger.warning("Wavefront within %d sites of the window edge at t=%.4g; "
                           "profile truncated", EDGE_SITES, t)
            break
        kept.append(t)
        sups.append(float(np.abs(values).max()))
        l2s.append(float(np.linalg.norm(values)))

    kept_t = np.asarray(kept)
    sup_norms = np.asarray(sups)
    l2_norms = np.asarray(l2s)
    drift = float(np.abs(l2_norms / norm0 - 1.0).max()) if norm0 > 0 and l2s else 0.0

    try:
        slope, intercept, band = fit_decay(kept_t, sup_norms)
    except ValueError:
        slope, intercept, band = math.nan, math.nan, (math.nan, math.nan)
        logger.warning("Not enough late times for a decay fit")

    logger.info("Decay profile: %d times up to t=%.4g, slope %.4f (N=%d)",
                kept_t.size, kept_t[-1] if kept_t.size else 0.0, slope, N)
    return DecayProfile(times=kept_t, sup_norms=sup_norms, l2_norms=l2_norms, N=N,
                        slope=slope, intercept=intercept, band=band,
                        boundary_reached=boundary, unitarity_drift=drift)


def dyadic_times(t_min: float, t_max: float, points: int) -> np.ndarray:
    if not 0 < t_min < t_max:
        raise ValueError("need 0 < t_min < t_max")
    return np.geomspace(t_min, t_max, points)


def reconstruct_evolution(phi: LatticeState, t: float, grid: SpectralGrid) -> LatticeState:
    """q_n(t) = (1/π) Σ_i w_i e^{-iE_i t}(g₁K_n + g₂J_n)(E_i) with G = S(φ)."""
    energies = grid.energies[grid.valid]
    if t != 0.0 and energies.size > 1:
        spacing = float(np.diff(energies).max())
        limit = math.pi / (8.0 * abs(t))
        if spacing > limit:
            raise ValueError(f"energy spacing {spacing:.3e} under-resolves e^(-iEt): need <= {limit:.3e}")

    G = spectral_transform(phi, grid)
    w = grid.weights * np.exp(-1j * grid.energies * t)
    values = ((w * G.g1) @ grid.K + (w * G.g2) @ grid.J) / math.pi
    return LatticeState(values)
