"""
Frequency vectors on the d-torus (period 2π per coordinate).

Functions:
    integer_vectors: all k with 0 < |k|₁ <= K, ordered by |k|₁
    half_resonance: ⟨k,ω⟩/2 reduced into [0, π)
    diophantine_margin: min of |k|^τ · dist(⟨k,ω⟩, πℤ) over 0 < |k|₁ <= K
    nearest_half_resonance: closest half-resonance to a given angle
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from qpdl.config import DEFAULT_GAMMA, DEFAULT_K_CHECK, DEFAULT_TAU, GOLDEN_OMEGA

logger = logging.getLogger(__name__)

# enumeration over the ℓ¹ ball grows like K^d
MAX_ENUMERATED_VECTORS = 2_000_000


@lru_cache(maxsize=32)
def _integer_vectors_cached(d: int, K: int) -> np.ndarray:
    axis = np.arange(-K, K + 1)
    if (2 * K + 1) ** d > MAX_ENUMERATED_VECTORS:
        raise ValueError(
            f"Enumerating |k|<= {K} in dimension {d} is too large; lower K"
        )
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=-1)
    norms = np.abs(ks).sum(axis=1)
    keep = (norms > 0) & (norms <= K)
    ks = ks[keep]
    norms = norms[keep]
    # ties in |k|₁ keep positive-leading vectors first (1 before -1)
    order = np.lexsort((-ks[:, 0], norms))
    ks = ks[order]
    ks.setflags(write=False)
    return ks


def integer_vectors(d: int, K: int) -> np.ndarray:
    if d < 1:
        raise ValueError(f"Dimension must be positive, got {d}")
    if K < 1:
        return np.zeros((0, d), dtype=int)
    return _integer_vectors_cached(int(d), int(K))


def norm1(k: Sequence[int]) -> int:
    return int(np.abs(np.asarray(k)).sum())


def dist_mod_pi(a, b):
    """Distance between angles modulo π, in [0, π/2]."""
    diff = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), np.pi)
    return np.minimum(diff, np.pi - diff)


def _dist_to_pi_lattice(s: np.ndarray) -> np.ndarray:
    # nearest multiple of π, ties broken downward
    j = np.ceil(s / np.pi - 0.5)
    return np.abs(s - j * np.pi)


@dataclass(frozen=True)
class Frequency:
    """
    ω on 𝕋^d = (ℝ/2πℤ)^d with Diophantine constants (γ, τ).

    The Diophantine inequality is verified for 0 < |k|₁ <= k_check at
    construction; k_check = 0 skips the verification (used for rational
    test frequencies).
    """

    omega: Tuple[float, ...] = (GOLDEN_OMEGA,)
    gamma: float = DEFAULT_GAMMA
    tau: float = DEFAULT_TAU
    k_check: int = DEFAULT_K_CHECK

    def __post_init__(self):
        omega = tuple(float(w) for w in np.atleast_1d(self.omega))
        object.__setattr__(self, "omega", omega)

        if len(omega) == 0:
            raise ValueError("Frequency vector must be non-empty")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.tau <= self.d - 1:
            raise ValueError(f"tau must exceed d-1={self.d - 1}, got {self.tau}")
        if self.k_check < 0:
            raise ValueError(f"k_check must be non-negative, got {self.k_check}")

        if self.k_check > 0:
            margin, k = diophantine_margin(self, self.k_check)
            if margin < self.gamma:
                raise ValueError(
                    f"omega fails the Diophantine check up to |k|={self.k_check}: "
                    f"margin {margin:.3e} < gamma {self.gamma} at k={tuple(k)}"
                )
            logger.debug("Diophantine margin %.4g up to |k|=%d", margin, self.k_check)

    @property
    def d(self) -> int:
        return len(self.omega)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.omega, dtype=float)


def half_resonance(k: Sequence[int], freq: Frequency) -> float:
    k = np.asarray(k, dtype=float)
    return float(np.mod(k @ freq.vector / 2.0, np.pi))


def half_resonances(ks: np.ndarray, freq: Frequency) -> np.ndarray:
    return np.mod(np.asarray(ks, dtype=float) @ freq.vector / 2.0, np.pi)


def diophantine_margin(freq: Frequency, K: int) -> Tuple[float, np.ndarray]:
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")

    ks = integer_vectors(freq.d, K)
    s = ks @ freq.vector
    margins = np.abs(ks).sum(axis=1).astype(float) ** freq.tau * _dist_to_pi_lattice(s)
    idx = int(np.argmin(margins))
    return float(margins[idx]), ks[idx].copy()


def nearest_half_resonance(
    value: float, freq: Frequency, K: int
) -> Tuple[np.ndarray, float]:
    ks = integer_vectors(freq.d, K)
    dists = dist_mod_pi(value, half_resonances(ks, freq))
    idx = int(np.argmin(dists))
    return ks[idx].copy(), float(dists[idx])


def violations(
    value: float, freq: Frequency, K: int, band: float, tau: Optional[float] = None
) -> np.ndarray:
    """All k with dist(value, ⟨k,ω⟩/2) < band/|k|^τ, ordered by |k|₁."""
    if K < 1:
        return np.zeros((0, freq.d), dtype=int)
    tau = freq.tau if tau is None else tau
    ks = integer_vectors(freq.d, K)
    norms = np.abs(ks).sum(axis=1).astype(float)
    dists = dist_mod_pi(value, half_resonances(ks, freq))
    return ks[dists < band / norms ** tau].copy()


def first_violation(
    value: float, freq: Frequency, K: int, band: float, tau: Optional[float] = None
) -> Optional[np.ndarray]:
    bad = violations(value, freq, K, band, tau)
    if len(bad) == 0:
        return None
    return bad[0]
