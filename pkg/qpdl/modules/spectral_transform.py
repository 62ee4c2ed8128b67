"""
Approximate generalized eigenfunctions from reduced cocycles and the
spectral transform built on them.

For an energy with real α_J the sequence v_n = e^{inα} Z_J(θ+nω) u, with
u the eigenvector of A_J for e^{iα}, solves the transfer recursion up to
F_J; its first component ψ_n is the Bloch wave and f_n = e^{-inρ_J} ψ_n.

    K_n = Im(ψ_n f̄₀)/|f₀|,   J_n = Re(ψ_n f̄₀)/|f₀|
    (Sq)(E) = (Σ q_n K_n(E), Σ q_n J_n(E))
    q_n = (1/π) ∫ (g₁K_n + g₂J_n) ρ′ dE

Integrals against ρ′ dE are Stieltjes sums Σ w_i F(E_i) with the
ρ-increment of every grid cell assigned to its endpoints.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from qpdl.config import CONTRACT_LIMITS, NONRESONANCE_BAND_SCALE
from qpdl.errors import NumericalContractError
from qpdl.modules.cocycle import rotation_numbers
from qpdl.modules.kam import KamSchedule, ReducedCocycle, TorusGrid, reduce
from qpdl.modules.lattice_operator import LatticeState, hamiltonian_apply, potential_diagonal
from qpdl.modules.potential import FourierSeries, eval_series
from qpdl.modules.torus_freq import Frequency
from qpdl.modules.workers import parallel_map

logger = logging.getLogger(__name__)

EIGEN_RESIDUAL_TOL = 1e-6
STRUCTURE_TOL = 1e-6
LOST_MASS_TOL = CONTRACT_LIMITS["lost_mass"]


@dataclass(frozen=True)
class BlochWave:
    E: float
    rho: float
    sites: np.ndarray
    psi: np.ndarray
    f: np.ndarray
    eigen_residual: float


@dataclass(frozen=True)
class EigenfunctionData:
    E: float
    rho: float
    sites: np.ndarray
    K: np.ndarray
    J: np.ndarray
    # columns: n-1, n, n+1
    beta: np.ndarray
    misfit: float

    @property
    def wronskian(self) -> np.ndarray:
        """K_{n+1}J_n - K_nJ_{n+1}; constant in n for exact eigenfunctions."""
        return self.K[1:] * self.J[:-1] - self.K[:-1] * self.J[1:]


@dataclass
class SpectralGrid:
    energies: np.ndarray
    rho: np.ndarray
    rho_prime: np.ndarray
    layers: np.ndarray
    valid: np.ndarray
    K: np.ndarray
    J: np.ndarray
    weights: np.ndarray
    N: int
    lost_mass: float = 0.0
    misfit: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def coarse(self) -> bool:
        return self.lost_mass > LOST_MASS_TOL


@dataclass(frozen=True)
class SpectralVector:
    g1: np.ndarray
    g2: np.ndarray

    def __add__(self, other: "SpectralVector") -> "SpectralVector":
        return SpectralVector(self.g1 + other.g1, self.g2 + other.g2)

    def scaled(self, c: complex) -> "SpectralVector":
        return SpectralVector(c * self.g1, c * self.g2)


def _eigenvector(A: np.ndarray, alpha: float) -> np.ndarray:
    w, v = np.linalg.eig(A)
    idx = int(np.argmin(np.abs(w - np.exp(1j * alpha))))
    return v[:, idx]


def _normalised_vector(state: ReducedCocycle) -> np.ndarray:
    """u scaled so that the torus mean of |[Z u]₁|² is one."""
    u = _eigenvector(state.A, state.xi)
    Z = state.Z
    first = Z.coeffs[:, 0, 0] * u[0] + Z.coeffs[:, 0, 1] * u[1]
    mass = float(np.sum(np.abs(first) ** 2))
    if mass <= 0:
        raise NumericalContractError("bloch_wave", f"degenerate conjugator at E={state.E}")
    return u / math.sqrt(mass)


def bloch_wave(state: ReducedCocycle, theta, N: int, sin5: bool = False) -> BlochWave:
    if state.alpha_imaginary:
        raise ValueError(f"alpha_J is imaginary at E={state.E}: no Bloch wave in a gap")
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")

    theta = np.asarray(theta, dtype=float).reshape(state.freq.d)
    sites = np.arange(-N, N + 1)
    alpha = state.xi
    u = _normalised_vector(state)

    points = theta[None, :] + sites[:, None] * state.freq.vector[None, :]
    Zn = eval_series(state.Z, points)
    psi = np.exp(1j * sites * alpha) * (Zn[:, 0, 0] * u[0] + Zn[:, 0, 1] * u[1])
    if sin5:
        psi = psi * math.sin(state.xi) ** 5

    rho = state.rho
    f = np.exp(-1j * sites * rho) * psi

    diagonal = potential_diagonal(state.V, theta, state.freq, N) - state.E
    residual = hamiltonian_apply(diagonal, psi)[1:-1]
    scale = max(float(np.abs(psi).max()), 1e-300)
    eigen_residual = float(np.abs(residual).max()) / scale

    tolerance = EIGEN_RESIDUAL_TOL * (1.0 + abs(state.E))
    if eigen_residual > tolerance:
        logger.warning("Bloch wave at E=%.6f has eigen-residual %.2e > %.2e",
                       state.E, eigen_residual, tolerance)
    return BlochWave(E=state.E, rho=rho, sites=sites, psi=psi, f=f, eigen_residual=eigen_residual)


def eigenfunctions(state: ReducedCocycle, theta, N: int, sin5: bool = False) -> EigenfunctionData:
    """
    K_n, J_n and the three-term coefficients β(n, n-1..n+1).

    The structural guess comes from splitting ψ_n f̄₀/|f₀| into its Z₁₁ and
    Z₁₂ parts, e^{inρ}Y_n + e^{i(n-1)ρ}X_n; the real β closest to
    (Re X_n, Re Y_n, 0) that reproduces J_n + iK_n exactly is kept and the
    distance between the two is reported as the misfit.
    """
    wave = bloch_wave(state, theta, N, sin5)
    sites = wave.sites
    psi0 = wave.psi[N]
    size0 = abs(psi0)
    if size0 == 0.0:
        raise NumericalContractError("bloch_wave", f"f_0 vanishes at E={state.E}")
    phase = np.conj(psi0) / size0

    target = wave.psi * phase
    K = target.imag
    J = target.real

    theta = np.asarray(theta, dtype=float).reshape(state.freq.d)
    u = _normalised_vector(state)
    points = theta[None, :] + sites[:, None] * state.freq.vector[None, :]
    Zn = eval_series(state.Z, points)
    rho = wave.rho
    drift = np.exp(-1j * sites * (rho - state.xi)) * phase
    scale = math.sin(state.xi) ** 5 if sin5 else 1.0
    Y = drift * Zn[:, 0, 0] * u[0] * scale
    X = drift * Zn[:, 0, 1] * u[1] * np.exp(1j * rho) * scale

    guess = np.stack([X.real, Y.real, np.zeros_like(Y.real)], axis=1)
    angles = (sites[:, None] + np.array([-1, 0, 1])[None, :]) * rho
    B = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    rhs = np.stack([J, K], axis=1) - np.einsum("nij,nj->ni", B, guess)
    beta = guess + np.einsum("nij,nj->ni", np.linalg.pinv(B), rhs)

    misfit = float(np.abs(beta - guess).max())
    if misfit > STRUCTURE_TOL:
        logger.debug("E=%.6f three-term misfit %.2e", state.E, misfit)
    return EigenfunctionData(E=state.E, rho=rho, sites=sites, K=K, J=J, beta=beta, misfit=misfit)


def stieltjes_weights(rho: np.ndarray, valid: np.ndarray) -> tuple:
    """Per-point weights whose sum against F approximates ∫ F dρ; also the unassigned mass."""
    weights = np.zeros(rho.shape)
    lost = 0.0
    increments = np.maximum(np.diff(rho), 0.0)
    for i, dr in enumerate(increments):
        left, right = valid[i], valid[i + 1]
        if left and right:
            weights[i] += 0.5 * dr
            weights[i + 1] += 0.5 * dr
        elif left:
            weights[i] += dr
        elif right:
            weights[i + 1] += dr
        else:
            lost += dr
    return weights, lost


def build_spectral_grid(V: FourierSeries, freq: Frequency, theta, energies: Sequence[float],
                        N: int, sched: KamSchedule, J: Optional[int] = None,
                        n_rotation: int = 20_000, sin5: bool = False,
                        grid: Optional[TorusGrid] = None,
                        band_scale: float = NONRESONANCE_BAND_SCALE) -> SpectralGrid:
    energies = np.asarray(energies, dtype=float)
    if energies.ndim != 1 or energies.size < 3:
        raise ValueError("energy grid must be 1-D with at least three points")
    if np.any(np.diff(energies) <= 0):
        raise ValueError("energy grid must be strictly increasing")

    rho, _ = rotation_numbers(energies, V, theta, freq, n_rotation)
    rho = np.maximum.accumulate(rho)
    rho_prime = np.maximum(np.gradient(rho, energies), 0.0)
    torus = grid or TorusGrid.for_dimension(freq.d)

    def build(E: float):
        try:
            state = reduce(E, V, freq, sched, J, torus, band_scale)
        except NumericalContractError as e:
            logger.warning("E=%.6f dropped from the spectral grid: %s", E, e)
            return None, 0
        if state.alpha_imaginary:
            return None, state.layer
        return eigenfunctions(state, theta, N, sin5), state.layer

    results = parallel_map(build, energies)

    size = 2 * N + 1
    K = np.zeros((energies.size, size))
    Jt = np.zeros((energies.size, size))
    valid = np.zeros(energies.size, dtype=bool)
    layers = np.zeros(energies.size, dtype=int)
    misfit = np.zeros(energies.size)
    for i, (data, layer) in enumerate(results):
        layers[i] = layer
        if data is not None:
            K[i], Jt[i] = data.K, data.J
            misfit[i] = data.misfit
            valid[i] = True

    weights, lost = stieltjes_weights(rho, valid)
    if lost > LOST_MASS_TOL:
        logger.warning("Spectral grid leaves %.3e of the rho-mass unassigned; refine the grid", lost)
    logger.info("Spectral grid: %d energies, %d with eigenfunctions, window N=%d",
                energies.size, int(valid.sum()), N)
    return SpectralGrid(energies=energies, rho=rho, rho_prime=rho_prime, layers=layers,
                        valid=valid, K=K, J=Jt, weights=weights, N=N, lost_mass=lost,
                        misfit=misfit)


def _on_window(q: LatticeState, grid: SpectralGrid) -> np.ndarray:
    if q.N > grid.N:
        outside = np.concatenate([q.values[:q.N - grid.N], q.values[q.N + grid.N + 1:]])
        if np.any(outside != 0):
            raise ValueError(f"state has support outside the grid window [-{grid.N}, {grid.N}]")
    return q.resized(grid.N).values


def spectral_transform(q: LatticeState, grid: SpectralGrid) -> SpectralVector:
    values = _on_window(q, grid)
    return SpectralVector(grid.K @ values, grid.J @ values)


def inverse_transform(G: SpectralVector, grid: SpectralGrid, strict: bool = False) -> LatticeState:
    """
    (1/π) Σ_i w_i (g₁(E_i) K_n(E_i) + g₂(E_i) J_n(E_i)).

    A coarse grid (ρ-mass left unassigned above LOST_MASS_TOL) raises a
    lost_mass contract error when strict; otherwise it is logged and the
    caller reports grid.lost_mass as a measured contract quantity.
    """
    if not (np.all(np.isfinite(G.g1)) and np.all(np.isfinite(G.g2))):
        raise ValueError("spectral vector must be finite on the grid")
    if grid.coarse:
        if strict:
            raise NumericalContractError(
                "lost_mass", f"{grid.lost_mass:.3e} of the rho-mass unassigned on the grid")
        logger.warning("inverse transform on a coarse grid (lost mass %.2e)", grid.lost_mass)
    w = grid.weights
    values = ((w * G.g1) @ grid.K + (w * G.g2) @ grid.J) / math.pi
    return LatticeState(values)


def spectral_norm_sq(G: SpectralVector, grid: SpectralGrid) -> float:
    """‖G‖² in L²(dφ) with dφ = (ρ′/π) dE on both components."""
    return float(np.sum(grid.weights * (np.abs(G.g1) ** 2 + np.abs(G.g2) ** 2)) / math.pi)


def frame_bounds(sample_states: Sequence[LatticeState], grid: SpectralGrid) -> tuple:
    if len(sample_states) < 10:
        raise ValueError(f"need at least 10 sample states, got {len(sample_states)}")
    matrix = np.stack([_on_window(q, grid) for q in sample_states])
    if np.linalg.matrix_rank(matrix) < len(sample_states):
        raise ValueError("sample states must be linearly independent")

    ratios = []
    for q in sample_states:
        norm = q.l2() ** 2
        if norm == 0.0:
            raise ValueError("sample states must be non-zero")
        ratios.append(spectral_norm_sq(spectral_transform(q, grid), grid) / norm)
    return float(min(ratios)), float(max(ratios))


def roundtrip_error(q: LatticeState, grid: SpectralGrid, strict: bool = False) -> float:
    """‖S⁻¹Sq - q‖∞ / ‖q‖∞ on the grid window."""
    back = inverse_transform(spectral_transform(q, grid), grid, strict)
    original = q.resized(grid.N)
    return float(np.abs(back.values - original.values).max() / original.sup())


def random_samples(N: int, support: int, count: int, seed: int) -> List[LatticeState]:
    rng = np.random.default_rng(seed)
    return [LatticeState.random(N, support, int(s)) for s in rng.integers(0, 2 ** 31, count)]
