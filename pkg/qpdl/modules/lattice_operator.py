"""
The operator (H_θ q)_n = -(q_{n+1} + q_{n-1}) + V(θ + nω) q_n on the
window n ∈ [-N, N] with Dirichlet boundary (values outside are zero).

Functions:
    apply_H: one application of H_θ
    truncated_spectrum: eigenvalues of the (2N+1)x(2N+1) section
    ids / ids_curve: integrated density of states, averaged over orbit phases
    detect_gaps: resolvent intervals with their gap labels
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal, eigvalsh_tridiagonal

from qpdl.errors import NumericalContractError
from qpdl.modules.potential import FourierSeries, orbit_values, sup_bound
from qpdl.modules.torus_freq import Frequency, nearest_half_resonance
from qpdl.modules.workers import parallel_map

logger = logging.getLogger(__name__)

# phase-averaged eigenvalue density (per unit energy) below which an
# interval is inspected as a gap candidate
CANDIDATE_DENSITY_FLOOR = 0.08
# eigenvectors with less weight than this in the central half are edge states
EDGE_STATE_WEIGHT = 0.25


@dataclass
class LatticeState:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 1 or values.size % 2 == 0 or values.size < 3:
            raise ValueError("LatticeState needs an odd-length 1-D array (window [-N, N], N >= 1)")
        if not np.all(np.isfinite(values)):
            raise ValueError("LatticeState values must be finite")
        self.values = values

    @property
    def N(self) -> int:
        return (self.values.size - 1) // 2

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def at(self, n: int) -> complex:
        return complex(self.values[n + self.N])

    def l1(self) -> float:
        return float(np.abs(self.values).sum())

    def l2(self) -> float:
        return float(np.linalg.norm(self.values))

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def conj(self) -> "LatticeState":
        return LatticeState(np.conj(self.values))

    def scaled(self, c: complex) -> "LatticeState":
        return LatticeState(c * self.values)

    def resized(self, N: int) -> "LatticeState":
        """Embed into (or cut to) the window [-N, N]."""
        out = np.zeros(2 * N + 1, dtype=complex)
        m = min(N, self.N)
        out[N - m:N + m + 1] = self.values[self.N - m:self.N + m + 1]
        return LatticeState(out)

    @classmethod
    def delta(cls, N: int, site: int = 0) -> "LatticeState":
        if abs(site) > N:
            raise ValueError(f"site {site} outside window [-{N}, {N}]")
        values = np.zeros(2 * N + 1, dtype=complex)
        values[site + N] = 1.0
        return cls(values)

    @classmethod
    def gaussian(cls, N: int, width: float, center: int = 0) -> "LatticeState":
        if width <= 0:
            raise ValueError(f"width must be positive, got {width}")
        n = np.arange(-N, N + 1)
        values = np.exp(-((n - center) ** 2) / (2.0 * width ** 2)).astype(complex)
        return cls(values / np.linalg.norm(values))

    @classmethod
    def random(cls, N: int, support: int, seed: int) -> "LatticeState":
        rng = np.random.default_rng(seed)
        values = np.zeros(2 * N + 1, dtype=complex)
        s = min(support, N)
        values[N - s:N + s + 1] = rng.standard_normal(2 * s + 1) + 1j * rng.standard_normal(2 * s + 1)
        return cls(values)


@dataclass(frozen=True)
class Gap:
    lower: float
    upper: float
    rotation: float
    ids_value: float
    label: Tuple[int, ...]
    label_distance: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass
class SpectrumSummary:
    eigenvalues: np.ndarray
    inf_sigma: float
    sup_sigma: float
    gaps: List[Gap] = field(default_factory=list)


def spectral_enclosure(V: FourierSeries) -> Tuple[float, float]:
    s = sup_bound(V)
    return -2.0 - s, 2.0 + s


def potential_diagonal(V: FourierSeries, theta, freq: Frequency, N: int) -> np.ndarray:
    return orbit_values(V, theta, freq.vector, np.arange(-N, N + 1))


def hamiltonian_apply(diagonal: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = diagonal * q
    out[:-1] -= q[1:]
    out[1:] -= q[:-1]
    return out


def apply_H(V: FourierSeries, theta, freq: Frequency, q: LatticeState) -> LatticeState:
    diagonal = potential_diagonal(V, theta, freq, q.N)
    return LatticeState(hamiltonian_apply(diagonal, q.values))


def _eigenvalues(diagonal: np.ndarray) -> np.ndarray:
    off = -np.ones(diagonal.size - 1)
    try:
        return eigvalsh_tridiagonal(diagonal, off)
    except LinAlgError as e:
        raise NumericalContractError("eigensolver", f"tridiagonal eigensolver failed: {e}")


def truncated_spectrum(V: FourierSeries, theta, freq: Frequency, N: int) -> SpectrumSummary:
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    eig = _eigenvalues(potential_diagonal(V, theta, freq, N))
    return SpectrumSummary(eigenvalues=eig, inf_sigma=float(eig[0]), sup_sigma=float(eig[-1]))


def orbit_phases(theta0, freq: Frequency, count: int) -> np.ndarray:
    theta0 = np.asarray(theta0, dtype=float).reshape(freq.d)
    return theta0[None, :] + np.arange(count)[:, None] * freq.vector[None, :]


def _phase_spectra(V: FourierSeries, freq: Frequency, N: int, theta_samples: int,
                   theta0) -> List[np.ndarray]:
    if theta_samples < 1:
        raise ValueError(f"theta_samples must be positive, got {theta_samples}")
    phases = orbit_phases(theta0, freq, theta_samples)
    return parallel_map(
        lambda th: _eigenvalues(potential_diagonal(V, th, freq, N)), list(phases)
    )


def _mean_counts(spectra: List[np.ndarray], energies: np.ndarray) -> np.ndarray:
    counts = np.zeros(energies.shape, dtype=float)
    for eig in spectra:
        counts += np.searchsorted(eig, energies, side="right")
    return counts / len(spectra)


def ids_curve(energies, V: FourierSeries, freq: Frequency, N: int,
              theta_samples: int, theta0=0.0) -> np.ndarray:
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    energies = np.asarray(energies, dtype=float)
    spectra = _phase_spectra(V, freq, N, theta_samples, theta0)
    return _mean_counts(spectra, energies) / (2 * N + 1)


def ids(E: float, V: FourierSeries, freq: Frequency, N: int, theta_samples: int,
        theta0=0.0) -> float:
    return float(ids_curve(np.array([E]), V, freq, N, theta_samples, theta0)[0])


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Inclusive index runs where mask is True."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def _bulk_eigenvalues(diagonal: np.ndarray, lo: float, hi: float) -> np.ndarray:
    off = -np.ones(diagonal.size - 1)
    try:
        w, v = eigh_tridiagonal(diagonal, off, select="v", select_range=(lo, hi))
    except LinAlgError as e:
        raise NumericalContractError("eigensolver", f"windowed eigensolver failed: {e}")
    if w.size == 0:
        return w
    N = (diagonal.size - 1) // 2
    central = slice(N - N // 2, N + N // 2 + 1)
    weight = (np.abs(v[central, :]) ** 2).sum(axis=0)
    return w[weight >= EDGE_STATE_WEIGHT]


def detect_gaps(V: FourierSeries, freq: Frequency, N: int, resolution: float = 1e-3,
                theta_samples: int = 64, theta0=0.0, label_k: int = 20,
                density_floor: float = CANDIDATE_DENSITY_FLOOR) -> SpectrumSummary:
    """
    Locate spectral gaps of width >= resolution.

    Candidates are intervals where the phase-averaged eigenvalue density
    drops below density_floor; inside a candidate the eigenvectors are
    computed and states localised at the Dirichlet ends are discarded, so
    a gap is an interval free of bulk eigenvalues for every sampled phase.
    The rotation value of a gap is π(c + 1/2)/(2N + 2) with c the
    phase-averaged count below its midpoint.
    """
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")

    lo, hi = spectral_enclosure(V)
    spectra = _phase_spectra(V, freq, N, theta_samples, theta0)
    pooled = np.sort(np.concatenate(spectra))
    size = 2 * N + 1

    step = resolution / 4.0
    energies = np.arange(lo, hi + step, step)
    counts = _mean_counts(spectra, energies)
    window = 4
    density = (counts[window:] - counts[:-window]) / (size * resolution)
    interior = (counts[:-window] > 0.5) & (counts[window:] < size - 0.5)
    candidates = _runs((density < density_floor) & interior)

    phases = orbit_phases(theta0, freq, theta_samples)
    diagonals = [potential_diagonal(V, th, freq, N) for th in phases]

    gaps: List[Gap] = []
    for start, stop in candidates:
        a = energies[start] - resolution
        b = energies[stop + window] + resolution
        bulk = np.concatenate([_bulk_eigenvalues(dg, a, b) for dg in diagonals])
        edges = np.concatenate([[a], np.sort(bulk), [b]])
        spacing = np.diff(edges)
        for i in np.nonzero(spacing >= resolution)[0]:
            g_lo, g_hi = edges[i], edges[i + 1]
            # open ends of the inspected window are not gap edges
            if i == 0 or i == len(spacing) - 1:
                continue
            mid = 0.5 * (g_lo + g_hi)
            c = _mean_counts(spectra, np.array([mid]))[0]
            rotation = np.pi * (c + 0.5) / (2 * N + 2)
            k, dist = nearest_half_resonance(rotation, freq, label_k)
            gaps.append(Gap(
                lower=float(g_lo), upper=float(g_hi), rotation=float(rotation),
                ids_value=float(c / size), label=tuple(int(x) for x in k),
                label_distance=float(dist),
            ))

    # neighbouring candidates can report the same gap
    unique: List[Gap] = []
    for gap in sorted(gaps, key=lambda g: g.lower):
        if unique and gap.lower < unique[-1].upper:
            if gap.width > unique[-1].width:
                unique[-1] = gap
            continue
        unique.append(gap)

    logger.info("Detected %d gaps at resolution %.1e (N=%d, %d phases)",
                len(unique), resolution, N, theta_samples)
    return SpectrumSummary(
        eigenvalues=pooled, inf_sigma=float(pooled[0]), sup_sigma=float(pooled[-1]), gaps=unique,
    )
