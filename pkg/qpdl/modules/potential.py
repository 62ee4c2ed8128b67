"""
Truncated Fourier series on the d-torus.

A FourierSeries stores a finite coefficient table {k: c_k}. With
harmonic = 1 the basis is e^{i⟨k,θ⟩} on 𝕋^d; with harmonic = 2 it is
e^{i⟨k,θ⟩/2}, i.e. the doubled torus 2𝕋^d used for KAM conjugators.
Coefficients are scalars or 2x2 matrices; the reality condition
c_{-k} = conj(c_k) is enforced entrywise.

Functions:
    eval_series: Σ c_k e^{i⟨k,θ⟩/h} at one or many θ
    analytic_norm_bound: Σ |c_k| e^{r|k|₁}, an upper bound of the strip sup-norm
    shifted: the series of θ ↦ V(θ + δ)
    sup_bound: Σ |c_k|, an upper bound of ‖V‖∞ on real θ
    cosine, random_analytic, from_triples, zero: generators
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

REALITY_TOL = 1e-12


@dataclass(frozen=True)
class FourierSeries:
    modes: np.ndarray
    coeffs: np.ndarray
    radius: float = 0.5
    harmonic: int = 1

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=int)
        coeffs = np.asarray(self.coeffs, dtype=complex)

        if modes.ndim != 2:
            raise ValueError(f"modes must be a (n, d) array, got shape {modes.shape}")
        if coeffs.shape[0] != modes.shape[0]:
            raise ValueError("modes and coeffs must have the same length")
        if coeffs.ndim not in (1, 3):
            raise ValueError("coeffs must be scalar (n,) or matrix (n, 2, 2)")
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.harmonic not in (1, 2):
            raise ValueError(f"harmonic must be 1 or 2, got {self.harmonic}")

        modes.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeffs", coeffs)
        self._check_reality()

    def _check_reality(self):
        if len(self.modes) == 0:
            return
        index = {tuple(k): i for i, k in enumerate(self.modes)}
        scale = max(1.0, float(np.abs(self.coeffs).max()))
        for k, i in index.items():
            j = index.get(tuple(-x for x in k))
            partner = 0.0 if j is None else self.coeffs[j]
            if np.max(np.abs(np.conj(self.coeffs[i]) - partner)) > REALITY_TOL * scale:
                raise ValueError(f"Reality condition violated at k={k}")

    @property
    def d(self) -> int:
        return self.modes.shape[1]

    @property
    def is_matrix(self) -> bool:
        return self.coeffs.ndim == 3

    def coefficient(self, k: Sequence[int]):
        hits = np.nonzero((self.modes == np.asarray(k)).all(axis=1))[0]
        if hits.size == 0:
            return np.zeros((2, 2), dtype=complex) if self.is_matrix else 0j
        return self.coeffs[hits[0]]


def zero(d: int = 1) -> FourierSeries:
    return FourierSeries(np.zeros((0, d), dtype=int), np.zeros(0, dtype=complex))


def cosine(eps: float, d: int = 1, direction: Optional[Sequence[int]] = None,
           radius: float = 0.5) -> FourierSeries:
    """2ε cos⟨e,θ⟩, coefficients ε at ±e (default e = e₁)."""
    e = np.zeros(d, dtype=int)
    if direction is None:
        e[0] = 1
    else:
        e[:] = direction
    if not e.any():
        raise ValueError("cosine direction must be non-zero")
    return FourierSeries(np.stack([e, -e]), np.array([eps, eps], dtype=complex), radius)


def random_analytic(eps: float, r: float, k_max: int, seed: int, d: int = 1) -> FourierSeries:
    """
    Random real-analytic potential with |c_k| ∝ e^{-r|k|₁} for |k|∞ <= k_max.

    Args:
        eps: target value of Σ|c_k| (sup-norm bound)
        r: decay rate of the coefficient envelope
        k_max: box truncation
        seed: numpy Generator seed
        d: torus dimension

    Returns:
        FourierSeries with zero mean and Hermitian-symmetric coefficients
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    rng = np.random.default_rng(seed)

    axis = np.arange(-k_max, k_max + 1)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=-1)
    # one representative of each ±k pair: first non-zero entry positive
    first = np.array([k[np.nonzero(k)[0][0]] if k.any() else 0 for k in ks])
    half = ks[first > 0]

    envelope = np.exp(-r * np.abs(half).sum(axis=1))
    raw = (rng.standard_normal(len(half)) + 1j * rng.standard_normal(len(half))) / np.sqrt(2)
    c = raw * envelope
    total = 2.0 * np.abs(c).sum()
    if total > 0:
        c *= eps / total

    modes = np.concatenate([half, -half])
    coeffs = np.concatenate([c, np.conj(c)])
    return FourierSeries(modes, coeffs, radius=r)


def from_triples(triples: Iterable[Tuple[Sequence[int], float, float]], d: int,
                 radius: float = 0.5) -> FourierSeries:
    table = {}
    for k, re, im in triples:
        k = tuple(int(x) for x in k)
        if len(k) != d:
            raise ValueError(f"Mode {k} has wrong dimension (expected {d})")
        table[k] = complex(re, im)

    for k, c in list(table.items()):
        minus = tuple(-x for x in k)
        if minus not in table:
            table[minus] = np.conj(c)

    if not table:
        return zero(d)
    modes = np.array(list(table.keys()), dtype=int)
    coeffs = np.array(list(table.values()), dtype=complex)
    return FourierSeries(modes, coeffs, radius)


def _phases(series: FourierSeries, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    flat = theta.reshape(-1, series.d)
    return np.exp(1j * (flat @ series.modes.T) / series.harmonic)


def eval_series(series: FourierSeries, theta) -> np.ndarray:
    """
    Evaluate at θ of shape (d,) or (..., d).

    Scalar series return real values (the imaginary part is dropped after
    the reality check); matrix series return complex (..., 2, 2) arrays,
    whose imaginary part is zero up to rounding.
    """
    theta = np.asarray(theta, dtype=float)
    if series.d == 1 and (theta.ndim == 0 or theta.shape[-1] != 1):
        theta = theta[..., None]
    if theta.shape[-1] != series.d:
        raise ValueError(f"theta must end with dimension {series.d}")
    lead = theta.shape[:-1]

    if len(series.modes) == 0:
        shape = lead + ((2, 2) if series.is_matrix else ())
        return np.zeros(shape, dtype=complex if series.is_matrix else float)

    phases = _phases(series, theta)
    if series.is_matrix:
        values = np.einsum("pm,mij->pij", phases, series.coeffs)
        return values.reshape(lead + (2, 2))

    values = phases @ series.coeffs
    return values.real.reshape(lead)


def eval_potential(V: FourierSeries, theta) -> float:
    return float(eval_series(V, np.asarray(theta, dtype=float).reshape(-1, V.d))[0])


def analytic_norm_bound(V: FourierSeries, r: float) -> float:
    if r <= 0:
        raise ValueError(f"r must be positive, got {r}")
    if len(V.modes) == 0:
        return 0.0
    sizes = np.abs(V.coeffs) if not V.is_matrix else np.linalg.norm(V.coeffs, axis=(1, 2))
    return float(np.sum(sizes * np.exp(r * np.abs(V.modes).sum(axis=1) / V.harmonic)))


def sup_bound(V: FourierSeries) -> float:
    if len(V.modes) == 0:
        return 0.0
    return float(np.abs(V.coeffs).sum())


def shifted(V: FourierSeries, delta) -> FourierSeries:
    delta = np.asarray(delta, dtype=float).reshape(V.d)
    phase = np.exp(1j * (V.modes @ delta) / V.harmonic)
    if V.is_matrix:
        coeffs = V.coeffs * phase[:, None, None]
    else:
        coeffs = V.coeffs * phase
    return FourierSeries(V.modes, coeffs, V.radius, V.harmonic)


def orbit_values(V: FourierSeries, theta, omega, n: np.ndarray) -> np.ndarray:
    """V(θ + nω) for an integer array n."""
    theta = np.asarray(theta, dtype=float).reshape(V.d)
    omega = np.asarray(omega, dtype=float).reshape(V.d)
    points = theta[None, :] + np.asarray(n, dtype=float)[:, None] * omega[None, :]
    return eval_series(V, points)
