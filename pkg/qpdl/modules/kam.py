"""
Finite-J reducibility of the Schrödinger cocycle (ω, A₀(E) + F₀).

State is kept as samples on a uniform grid of the doubled torus
[0, 4π)^d, so products and inverses are pointwise and exact at grid
nodes; Fourier coefficients come from the FFT with half-integer modes
(mode m stands for e^{i⟨m,θ⟩/2}, functions on 𝕋^d carry only even m).

One step solves the homological equation
    e^{i⟨k,ω⟩} W_k A - A W_k = F_k,   0 < |k|₁ <= N_j,
whose divisors are e^{i⟨k,ω⟩}λ_b - λ_a for eigenvalues λ_a, λ_b of A.
For elliptic A = R(ξ) these are e^{i⟨k,ω⟩} - 1 and e^{i(⟨k,ω⟩ ± 2ξ)} - 1.
The conjugation by Y = I + W (normalised into SL(2,ℝ)) is then applied
exactly, the mean becomes A_{j+1} and the rest F_{j+1}.

Functions:
    schedule: ε_j, N_j with the N_min floor
    nonresonance_check: smallest k whose half-resonance band contains ξ
    kam_step, resonant_rotation, reduce: the reduction itself
    partition_spectrum: layer labels Γ_j over an energy grid
    xi_derivative_diagnostics: five-point derivative checks of ξ_J and tr A_J
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qpdl.config import (
    DEFAULT_RADIUS,
    EPS_STAR,
    N_MIN,
    NONRESONANCE_BAND_SCALE,
    SIGMA,
    SIN_XI_BAND_SCALE,
)
from qpdl.errors import KamStepError, NumericalContractError
from qpdl.modules.potential import FourierSeries, analytic_norm_bound, eval_series, sup_bound
from qpdl.modules.torus_freq import Frequency, first_violation, half_resonance, violations
from qpdl.modules.workers import parallel_map

logger = logging.getLogger(__name__)

MIN_DIVISOR = 1e-14
RESIDUAL_TOL = 1e-8
ZERO_PERTURBATION = 1e-15
PRUNE_REL = 1e-16
EPS0_FLOOR = 1e-12
RESIDUAL_POINTS = 64

_I2 = np.eye(2)


# ===============================
# Schedule
# ===============================

@dataclass(frozen=True)
class KamSchedule:
    epsilons: Tuple[float, ...]
    orders_raw: Tuple[float, ...]
    orders: Tuple[int, ...]
    n_min: int
    sigma: float = SIGMA

    @property
    def J(self) -> int:
        return len(self.orders)

    @property
    def eps0(self) -> float:
        return self.epsilons[0]


def schedule(epsilon0: float, J: int, N_min: int = N_MIN) -> KamSchedule:
    """
    ε_{j+1} = ε_j^{1+σ}, N_j = 4^{j+1} σ |ln ε_j|, floored at N_min.

    Args:
        epsilon0: initial perturbation size, in (0, 1)
        J: number of steps
        N_min: truncation floor

    Returns:
        KamSchedule with ε_0..ε_J and N_0..N_{J-1}
    """
    if not 0.0 < epsilon0 < 1.0:
        raise ValueError(f"epsilon0 must be in (0, 1), got {epsilon0}")
    if J < 0:
        raise ValueError(f"J must be non-negative, got {J}")
    if N_min < 1:
        raise ValueError(f"N_min must be positive, got {N_min}")

    eps = [float(epsilon0)]
    for _ in range(J):
        eps.append(eps[-1] ** (1.0 + SIGMA))

    raw = [4.0 ** (j + 1) * SIGMA * abs(math.log(eps[j])) for j in range(J)]
    # absorb rounding so integral values are not bumped up
    orders = [max(int(math.ceil(n - 1e-9)), N_min) for n in raw]
    return KamSchedule(tuple(eps), tuple(raw), tuple(orders), N_min)


def schedule_for(V: FourierSeries, J: int, N_min: int = N_MIN, r: float = DEFAULT_RADIUS,
                 epsilon0: Optional[float] = None) -> KamSchedule:
    eps0 = analytic_norm_bound(V, r) if epsilon0 is None else epsilon0
    return schedule(max(eps0, EPS0_FLOOR), J, N_min)


def nonresonance_check(rho_approx: float, eps_j: float, N_j: int, freq: Frequency,
                       band_scale: float = 1.0,
                       sigma: float = SIGMA) -> Tuple[bool, Optional[np.ndarray]]:
    if N_j < 1:
        raise ValueError(f"N_j must be >= 1, got {N_j}")
    band = band_scale * eps_j ** sigma
    k = first_violation(rho_approx, freq, N_j, band)
    return k is None, k


# ===============================
# Grid on the doubled torus
# ===============================

@dataclass(frozen=True)
class TorusGrid:
    d: int
    size: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be positive, got {self.d}")
        if self.size < 8 or self.size % 4:
            raise ValueError(f"grid size must be a multiple of 4 and >= 8, got {self.size}")

    @classmethod
    def for_dimension(cls, d: int, size: Optional[int] = None) -> "TorusGrid":
        if size is None:
            size = 128 if d == 1 else 48
        return cls(d, size)

    @property
    def count(self) -> int:
        return self.size ** self.d

    @property
    def max_order(self) -> int:
        """Largest |k|₁ a homological solve may use without aliasing."""
        return self.size // 4 - 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.size,) * self.d

    @property
    def points(self) -> np.ndarray:
        axis = 4.0 * np.pi * np.arange(self.size) / self.size
        grids = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @property
    def modes(self) -> np.ndarray:
        axis = np.rint(np.fft.fftfreq(self.size) * self.size).astype(int)
        grids = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def coefficients(self, samples: np.ndarray) -> np.ndarray:
        axes = tuple(range(self.d))
        block = samples.reshape(self.shape + samples.shape[1:])
        return (np.fft.fftn(block, axes=axes) / self.count).reshape(samples.shape)

    def samples(self, coeffs: np.ndarray) -> np.ndarray:
        axes = tuple(range(self.d))
        block = coeffs.reshape(self.shape + coeffs.shape[1:])
        return (np.fft.ifftn(block, axes=axes) * self.count).reshape(coeffs.shape).real

    def shift_phases(self, omega: np.ndarray) -> np.ndarray:
        """Multipliers e^{i⟨m,ω⟩/2} of the shift θ ↦ θ + ω."""
        return np.exp(0.5j * (self.modes @ omega))

    def series(self, samples: np.ndarray, harmonic_out: int = 2,
               radius: float = DEFAULT_RADIUS) -> FourierSeries:
        coeffs = self.coefficients(samples)
        modes = self.modes
        keep = (np.abs(modes) < self.size // 2).all(axis=1)
        if harmonic_out == 1:
            keep &= (modes % 2 == 0).all(axis=1)
        sizes = np.linalg.norm(coeffs, axis=(1, 2))
        top = sizes.max() if sizes.size else 0.0
        keep &= sizes > PRUNE_REL * top
        modes = modes[keep]
        if harmonic_out == 1:
            modes = modes // 2
        return FourierSeries(modes, coeffs[keep], radius=radius, harmonic=harmonic_out)


# ===============================
# Reduced cocycle
# ===============================

@dataclass(frozen=True)
class StepRecord:
    j: int
    order_raw: float
    order: int
    norm_before: float
    norm_after: float
    min_divisor: float
    resonance: Tuple[int, ...]
    xi: float
    rho: float
    residual: float
    det_drift: float

    @property
    def contraction(self) -> float:
        """norm_after · min_divisor / norm_before², the constant C of the quadratic estimate."""
        if self.norm_before == 0.0:
            return 0.0
        return self.norm_after * self.min_divisor / self.norm_before ** 2


@dataclass
class ReducedCocycle:
    E: float
    V: FourierSeries
    freq: Frequency
    schedule: KamSchedule
    grid: TorusGrid
    A: np.ndarray
    F_samples: np.ndarray
    Z_samples: np.ndarray
    step: int = 0
    history: List[Tuple[int, ...]] = field(default_factory=list)
    steps: List[StepRecord] = field(default_factory=list)
    band_scale: float = NONRESONANCE_BAND_SCALE
    radius: float = DEFAULT_RADIUS
    residual_norm: float = 0.0

    @property
    def J(self) -> int:
        return self.step

    @property
    def F(self) -> FourierSeries:
        return self.grid.series(self.F_samples, harmonic_out=1, radius=self.radius)

    @property
    def Z(self) -> FourierSeries:
        return self.grid.series(self.Z_samples, harmonic_out=2, radius=self.radius)

    @property
    def eps(self) -> float:
        return self.schedule.epsilons[min(self.step, len(self.schedule.epsilons) - 1)]

    @property
    def trace(self) -> float:
        return float(np.trace(self.A))

    @property
    def elliptic(self) -> bool:
        return abs(self.trace) < 2.0

    @property
    def alpha_imaginary(self) -> bool:
        return not self.elliptic

    @property
    def xi(self) -> float:
        """Signed rotation angle of A when elliptic; 0 or π marks an imaginary α."""
        if self.elliptic:
            return normal_form(self.A)[0]
        return 0.0 if self.trace > 0 else math.pi

    @property
    def alpha(self) -> complex:
        if self.elliptic:
            return complex(self.xi)
        return complex(0.0, math.acosh(abs(self.trace) / 2.0))

    @property
    def resonances(self) -> List[Tuple[int, ...]]:
        return [k for k in self.history if any(k)]

    @property
    def rho(self) -> float:
        if not self.resonances:
            return self.xi
        shift = sum(half_resonance(k, self.freq) for k in self.resonances)
        return float(np.mod(self.xi + shift, math.pi))

    @property
    def layer(self) -> int:
        for j, k in enumerate(self.history):
            if any(k):
                return j + 1
        return 0

    def radius_at(self, j: int) -> float:
        return self.radius * (0.5 + 2.0 ** (-j - 1))

    def F_norm(self, j: Optional[int] = None) -> float:
        j = self.step if j is None else j
        return weighted_norm(self.grid, self.F_samples, self.radius_at(j))


def weighted_norm(grid: TorusGrid, samples: np.ndarray, r: float) -> float:
    """Σ_m ‖c_m‖_F e^{r|m|₁/2} over the half-integer grid modes."""
    coeffs = grid.coefficients(samples)
    sizes = np.linalg.norm(coeffs, axis=(1, 2))
    weights = np.exp(r * np.abs(grid.modes).sum(axis=1) / 2.0)
    return float(np.sum(sizes * weights))


def _adjugate(M: np.ndarray) -> np.ndarray:
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 1, 1] = M[..., 0, 0]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    return out


def _det(M: np.ndarray) -> np.ndarray:
    return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]


def rotation(angle) -> np.ndarray:
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty(angle.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def normal_form(A: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Signed α and real P with det P = 1 and P⁻¹AP = R(α), for elliptic A.

    P = [Re v, -Im v] for the eigenvector v of e^{i|α|}; if that has
    negative determinant the orientation-preserving choice [Re v, Im v]
    conjugates to R(-|α|) instead.
    """
    tr = float(np.trace(A))
    if abs(tr) >= 2.0:
        raise ValueError(f"A is not elliptic (trace {tr:.6g})")

    w, v = np.linalg.eig(A)
    idx = int(np.argmax(w.imag))
    vec = v[:, idx]
    alpha = float(np.angle(w[idx]))

    P = np.column_stack([vec.real, -vec.imag])
    det = float(np.linalg.det(P))
    if det < 0:
        alpha = -alpha
        P = np.column_stack([vec.real, vec.imag])
        det = -det
    return alpha, P / math.sqrt(det)


def _wrap(angle: float) -> float:
    """Reduce into (-π, π]."""
    out = math.remainder(angle, 2.0 * math.pi)
    return math.pi if out == -math.pi else out


def initial_state(E: float, V: FourierSeries, freq: Frequency, sched: KamSchedule,
                  grid: Optional[TorusGrid] = None,
                  band_scale: float = NONRESONANCE_BAND_SCALE,
                  radius: float = DEFAULT_RADIUS) -> ReducedCocycle:
    if V.d != freq.d:
        raise ValueError(f"potential dimension {V.d} != frequency dimension {freq.d}")
    grid = grid or TorusGrid.for_dimension(freq.d)
    if grid.d != freq.d:
        raise ValueError(f"grid dimension {grid.d} != frequency dimension {freq.d}")

    F = np.zeros((grid.count, 2, 2))
    F[:, 0, 0] = eval_series(V, grid.points)
    Z = np.broadcast_to(_I2, (grid.count, 2, 2)).copy()
    A = np.array([[-E, -1.0], [1.0, 0.0]])
    return ReducedCocycle(E=float(E), V=V, freq=freq, schedule=sched, grid=grid, A=A,
                          F_samples=F, Z_samples=Z, band_scale=band_scale, radius=radius)


def conjugacy_residual(state: ReducedCocycle, points: int = RESIDUAL_POINTS) -> float:
    """max over off-grid θ of ‖Z(θ+ω)⁻¹(A₀+F₀(θ))Z(θ) - A - F(θ)‖_F."""
    rng = np.random.default_rng(12345)
    theta = rng.uniform(0.0, 4.0 * np.pi, size=(points, state.freq.d))
    omega = state.freq.vector

    Z = state.Z
    Z0 = eval_series(Z, theta).real
    Z1 = eval_series(Z, theta + omega).real
    F = eval_series(state.F, theta).real

    M = np.zeros((points, 2, 2))
    M[:, 0, 0] = eval_series(state.V, theta) - state.E
    M[:, 0, 1] = -1.0
    M[:, 1, 0] = 1.0

    lhs = np.linalg.solve(Z1, M @ Z0)
    diff = lhs - state.A[None] - F
    return float(np.linalg.norm(diff, axis=(1, 2)).max())


def _residual_tolerance(state: ReducedCocycle) -> float:
    zsup = float(np.abs(state.Z_samples).max())
    msup = 2.0 + abs(state.E) + sup_bound(state.V)
    return RESIDUAL_TOL * max(1.0, zsup ** 2 * msup)


def _order(state: ReducedCocycle, j: int) -> int:
    if j >= state.schedule.J:
        raise ValueError(f"schedule has {state.schedule.J} steps, step {j} requested")
    N = state.schedule.orders[j]
    if N > state.grid.max_order:
        logger.warning("N_%d = %d exceeds grid capacity; truncating to %d",
                       j, N, state.grid.max_order)
        N = state.grid.max_order
    return N


# ===============================
# Steps
# ===============================

def kam_step(state: ReducedCocycle, sched: Optional[KamSchedule] = None,
             j: Optional[int] = None) -> ReducedCocycle:
    """One homological solve plus exact conjugation; returns a new state."""
    if sched is not None and sched is not state.schedule:
        state = replace(state, schedule=sched)
    j = state.step if j is None else j
    N = _order(state, j)
    grid = state.grid
    omega = state.freq.vector

    norm_before = state.F_norm(j)
    coeffs = grid.coefficients(state.F_samples)
    modes = grid.modes
    norms = np.abs(modes).sum(axis=1)
    solve_mask = (modes % 2 == 0).all(axis=1) & (norms > 0) & (norms <= 2 * N)

    min_divisor = math.inf
    Y = np.broadcast_to(_I2, (grid.count, 2, 2)).copy()
    Y_shift = Y.copy()

    if norm_before > ZERO_PERTURBATION and solve_mask.any():
        phases = grid.shift_phases(omega)
        sel = np.nonzero(solve_mask)[0]

        lam = np.linalg.eigvals(state.A)
        divisors = np.abs(phases[sel, None, None] * lam[None, None, :] - lam[None, :, None])
        worst = np.unravel_index(int(np.argmin(divisors)), divisors.shape)[0]
        min_divisor = float(divisors.min())
        if min_divisor < MIN_DIVISOR:
            raise KamStepError(j, f"small divisor {min_divisor:.2e}", modes[sel[worst]] // 2)

        A = state.A
        L = phases[sel, None, None] * np.kron(_I2, A.T)[None] - np.kron(A, _I2)[None]
        rhs = coeffs[sel].reshape(-1, 4)
        W_sel = np.linalg.solve(L, rhs[..., None])[..., 0].reshape(-1, 2, 2)

        W_coeffs = np.zeros_like(coeffs)
        W_coeffs[sel] = W_sel
        Y = _I2 + grid.samples(W_coeffs)
        Y_shift = _I2 + grid.samples(W_coeffs * phases[:, None, None])

        dets = _det(Y)
        dets_shift = _det(Y_shift)
        if dets.min() <= 0 or dets_shift.min() <= 0:
            raise KamStepError(j, "conjugator left SL(2,R)")
        Y /= np.sqrt(dets)[:, None, None]
        Y_shift /= np.sqrt(dets_shift)[:, None, None]

    conj = _adjugate(Y_shift) @ (state.A[None] + state.F_samples) @ Y
    mean = conj.mean(axis=0)
    det = float(_det(mean))
    if det <= 0:
        raise KamStepError(j, f"averaged matrix has determinant {det:.3e}")
    det_drift = abs(det - 1.0)
    A_new = mean / math.sqrt(det)
    F_new = conj - A_new[None]
    Z_new = state.Z_samples @ Y

    history = list(state.history)
    if len(history) <= j:
        history.append((0,) * state.freq.d)

    new = replace(state, A=A_new, F_samples=F_new, Z_samples=Z_new, step=j + 1,
                  history=history, steps=list(state.steps))
    norm_after = new.F_norm(j + 1)
    residual = conjugacy_residual(new)
    new.residual_norm = residual

    tolerance = _residual_tolerance(new)
    if residual > tolerance:
        raise NumericalContractError(
            "conjugacy_residual",
            f"step {j}: residual {residual:.3e} exceeds {tolerance:.3e} at E={state.E}",
        )

    new.steps.append(StepRecord(
        j=j, order_raw=state.schedule.orders_raw[j], order=N,
        norm_before=norm_before, norm_after=norm_after,
        min_divisor=min_divisor if math.isfinite(min_divisor) else 0.0,
        resonance=history[j], xi=new.xi, rho=new.rho, residual=residual, det_drift=det_drift,
    ))
    logger.debug("E=%.6f step %d: |F| %.3e -> %.3e, min divisor %.3e, residual %.2e",
                 state.E, j, norm_before, norm_after, min_divisor, residual)
    return new


def resonant_rotation(state: ReducedCocycle, k: Sequence[int],
                      sched: Optional[KamSchedule] = None,
                      j: Optional[int] = None) -> ReducedCocycle:
    """
    Conjugate by P·R(⟨k,θ⟩/2), moving ξ to ξ - ⟨k,ω⟩/2.

    P brings A to the rotation R(ξ); the half-angle rotation lives on the
    doubled torus, while the conjugated perturbation stays 2π-periodic.
    """
    k = np.asarray(k, dtype=int).reshape(state.freq.d)
    if not k.any():
        return state
    if sched is not None and sched is not state.schedule:
        state = replace(state, schedule=sched)
    j = state.step if j is None else j

    alpha, P = normal_form(state.A)
    P_inv = _adjugate(P)
    grid = state.grid
    half = 0.5 * (grid.points @ k)
    shift = 0.5 * float(k @ state.freq.vector)

    R0 = rotation(half)
    R1_inv = rotation(-(half + shift))
    T = R1_inv @ (P_inv @ (state.A[None] + state.F_samples) @ P) @ R0

    xi_new = _wrap(alpha - shift)
    A_new = rotation(xi_new)
    F_new = T - A_new[None]
    Z_new = state.Z_samples @ P @ R0

    history = list(state.history)
    entry = tuple(int(x) for x in k)
    if len(history) > j:
        history[j] = entry
    else:
        history.extend([(0,) * state.freq.d] * (j - len(history)))
        history.append(entry)

    new = replace(state, A=A_new, F_samples=F_new, Z_samples=Z_new, history=history)

    if j < state.schedule.J:
        N = _order(state, j)
        band = state.band_scale * state.schedule.epsilons[j] ** state.schedule.sigma
        others = [kk for kk in violations(xi_new, state.freq, N, band)
                  if tuple(kk) != entry]
        if others:
            raise KamStepError(j, f"rotated angle {xi_new:.6f} still resonant", others[0])

    logger.debug("E=%.6f resonance k=%s at step %d: xi %.6f -> %.6f",
                 state.E, entry, j, alpha, xi_new)
    return new


def reduce(E: float, V: FourierSeries, freq: Frequency, sched: KamSchedule,
           J: Optional[int] = None, grid: Optional[TorusGrid] = None,
           band_scale: float = NONRESONANCE_BAND_SCALE,
           radius: float = DEFAULT_RADIUS) -> ReducedCocycle:
    J = sched.J if J is None else J
    if J > sched.J:
        raise ValueError(f"J={J} exceeds the schedule length {sched.J}")
    size = analytic_norm_bound(V, radius)
    if size > EPS_STAR:
        raise ValueError(f"|V|_r = {size:.4g} exceeds the smallness threshold {EPS_STAR}")

    state = initial_state(E, V, freq, sched, grid, band_scale, radius)
    for j in range(J):
        if state.elliptic and state.F_norm(j) > ZERO_PERTURBATION:
            N = _order(state, j)
            ok, k = nonresonance_check(state.xi, sched.epsilons[j], N, freq,
                                       band_scale, sched.sigma)
            if not ok:
                state = resonant_rotation(state, k, sched, j)
        state = kam_step(state, sched, j)
    return state


# ===============================
# Partition of the energy axis
# ===============================

@dataclass(frozen=True)
class PartitionInterval:
    lower: float
    upper: float
    layer: int
    xi_monotone: bool


@dataclass
class SpectralPartition:
    intervals: List[PartitionInterval]
    energies: np.ndarray
    layers: np.ndarray
    xi: np.ndarray
    rho: np.ndarray
    alpha_imaginary: np.ndarray
    component_bound: float
    layer_measure: dict
    states: List[ReducedCocycle] = field(default_factory=list, repr=False)

    @property
    def component_count(self) -> int:
        return len(self.intervals)

    @property
    def within_bound(self) -> bool:
        return self.component_count <= self.component_bound


def partition_spectrum(V: FourierSeries, freq: Frequency, sched: KamSchedule, J: int,
                       E_grid: Sequence[float], grid: Optional[TorusGrid] = None,
                       band_scale: float = NONRESONANCE_BAND_SCALE) -> SpectralPartition:
    energies = np.asarray(E_grid, dtype=float)
    if energies.ndim != 1 or energies.size < 2:
        raise ValueError("E_grid must be a 1-D array with at least two energies")
    if np.any(np.diff(energies) <= 0):
        raise ValueError("E_grid must be strictly increasing")

    grid = grid or TorusGrid.for_dimension(freq.d)
    states = parallel_map(lambda E: reduce(E, V, freq, sched, J, grid, band_scale), energies)

    layers = np.array([s.layer for s in states])
    xi = np.array([s.xi for s in states])
    rho = np.array([s.rho for s in states])
    imag = np.array([s.alpha_imaginary for s in states])

    intervals = []
    start = 0
    for i in range(1, energies.size + 1):
        if i == energies.size or layers[i] != layers[start]:
            lo = energies[0] if start == 0 else 0.5 * (energies[start - 1] + energies[start])
            hi = energies[-1] if i == energies.size else 0.5 * (energies[i - 1] + energies[i])
            real = ~imag[start:i]
            steps = np.diff(xi[start:i][real])
            intervals.append(PartitionInterval(float(lo), float(hi), int(layers[start]),
                                               bool(np.all(steps >= -1e-9))))
            start = i

    eps0 = sched.epsilons[0]
    bound = abs(math.log(eps0)) ** (2 * J * J * freq.d)

    measure = {}
    same = layers[1:] == layers[:-1]
    for j in range(1, J + 1):
        cells = same & (layers[:-1] == j)
        measured = float(np.abs(np.diff(rho))[cells].sum())
        e = sched.epsilons[j - 1]
        measure[j] = {
            "measured": measured,
            "estimate": 3.0 * abs(math.log(e)) ** (2 * freq.d) * e ** sched.sigma,
        }

    logger.info("Partition: %d components over %d energies (bound %.3g)",
                len(intervals), energies.size, bound)
    return SpectralPartition(intervals=intervals, energies=energies, layers=layers, xi=xi,
                             rho=rho, alpha_imaginary=imag, component_bound=bound,
                             layer_measure=measure, states=list(states))


# ===============================
# Derivative diagnostics
# ===============================

@dataclass(frozen=True)
class XiDiagnostics:
    E: float
    xi: float
    xi_prime: float
    xi_second: float
    trace_prime: float
    identity_error: float
    # 1/3 < ξ′ <= N^{10τ}/|sin ξ|
    window_ok: bool
    # ε^{3σ/4}/(4|sin ξ|³) < |ξ″| <= N^{20τ}/|sin ξ|³
    second_window_ok: bool
    # the plateau bounds are only claimed on resonant layers
    window_applies: bool
    trace_window_ok: bool
    sin_xi: float
    sin_band: float
    sin_band_formula: float
    sin_flag: bool


def _five_point(values: np.ndarray, h: float) -> Tuple[float, float]:
    fm2, fm1, f0, fp1, fp2 = values
    first = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h)
    second = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h)
    return first, second


def xi_derivative_diagnostics(states: Sequence[ReducedCocycle]) -> XiDiagnostics:
    """
    ξ_J′, ξ_J″ and (tr A_J)′ from the middle five states of an equispaced stencil.

    On a layer component tr A_J = 2 cos ξ_J, so ξ_J′ = -(tr A_J)′/(2 sin ξ_J)
    up to the stencil error.
    """
    if len(states) < 5:
        raise ValueError(f"need at least 5 states, got {len(states)}")
    mid = len(states) // 2
    stencil = list(states[mid - 2:mid + 3])

    energies = np.array([s.E for s in stencil])
    h = float(np.diff(energies).mean())
    if h <= 0 or np.max(np.abs(np.diff(energies) - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError("stencil energies must be equispaced and increasing")
    if len({s.layer for s in stencil}) != 1:
        raise ValueError("stencil crosses a partition component boundary")
    if any(s.alpha_imaginary for s in stencil):
        raise ValueError("stencil contains energies with imaginary alpha")

    xi = np.array([s.xi for s in stencil])
    tr = np.array([s.trace for s in stencil])
    xi_p, xi_pp = _five_point(xi, h)
    tr_p, _ = _five_point(tr, h)

    center = stencil[2]
    sin_xi = math.sin(center.xi)
    identity = abs(xi_p + tr_p / (2.0 * sin_xi)) if sin_xi != 0.0 else math.inf

    eps_J = center.eps
    sched = center.schedule
    j_last = max(0, min(center.step, sched.J) - 1)
    order = sched.orders[j_last] if sched.J else sched.n_min
    trace_window = (sched.epsilons[j_last] ** (sched.sigma / 4.0) <= abs(tr_p)
                    <= order ** (10.0 * center.freq.tau))

    # plateau window of layer j+1 uses ε_j, N_j; layer 0 is checked against j = 0
    j_ref = max(center.layer - 1, 0)
    eps_ref = sched.epsilons[j_ref]
    order_ref = sched.orders[j_ref] if sched.J else sched.n_min
    tau = center.freq.tau
    abs_sin = abs(sin_xi)
    if abs_sin > 0.0:
        first_window = 1.0 / 3.0 < xi_p <= order_ref ** (10.0 * tau) / abs_sin
        second_window = (eps_ref ** (0.75 * sched.sigma) / (4.0 * abs_sin ** 3) < abs(xi_pp)
                         <= order_ref ** (20.0 * tau) / abs_sin ** 3)
    else:
        first_window = second_window = False

    formula = 1.5 * eps_J ** (1.0 / 20.0)
    band = SIN_XI_BAND_SCALE * formula
    return XiDiagnostics(
        E=center.E, xi=center.xi, xi_prime=xi_p, xi_second=xi_pp, trace_prime=tr_p,
        identity_error=identity, window_ok=bool(first_window),
        second_window_ok=bool(second_window), window_applies=center.layer >= 1,
        trace_window_ok=bool(trace_window),
        sin_xi=sin_xi, sin_band=band, sin_band_formula=formula, sin_flag=abs_sin <= band,
    )
