"""Orthonormal sparsity bases and their coherence with the unnormalized DFT.

``synthesize`` maps coefficients to a signal (``x = Psi @ alpha``) and
``analyze`` is its transpose. Both act along the last axis, so a stack of
vectors can be transformed at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .core import DimensionError, InvalidParameterError

__all__ = [
    "BasisId",
    "Orthobasis",
    "CoherenceValue",
    "make_basis",
    "synthesize",
    "analyze",
    "coherence",
    "dense_matrix",
    "COHERENCE_SNAP",
]

# FFT roundoff sits around 1e-15; values this close (relatively) to the
# extremes 1 and sqrt(n) are snapped onto them so those cases are exact.
COHERENCE_SNAP = 1e-12
COHERENCE_LIMIT = 65536


class BasisId(str, enum.Enum):
    SPIKES = "spikes"
    HAAR = "haar"
    DCT = "dct"
    FOURIER_REAL = "fourier"


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _haar_analyze(x):
    out = np.array(x, dtype=float, copy=True)
    n = out.shape[-1]
    length = n
    while length > 1:
        half = length // 2
        block = out[..., :length]
        even, odd = block[..., 0::2], block[..., 1::2]
        approx = (even + odd) / np.sqrt(2.0)
        detail = (even - odd) / np.sqrt(2.0)
        out[..., :half] = approx
        out[..., half:length] = detail
        length = half
    return out


def _haar_synthesize(alpha):
    out = np.array(alpha, dtype=float, copy=True)
    n = out.shape[-1]
    length = 1
    while length < n:
        approx = out[..., :length].copy()
        detail = out[..., length:2 * length].copy()
        out[..., 0:2 * length:2] = (approx + detail) / np.sqrt(2.0)
        out[..., 1:2 * length:2] = (approx - detail) / np.sqrt(2.0)
        length *= 2
    return out


def _fourier_analyze(x):
    # coefficient order: dc, cos_1, sin_1, cos_2, sin_2, ..., [nyquist]
    n = x.shape[-1]
    X = np.fft.rfft(x, axis=-1)
    alpha = np.empty(x.shape)
    alpha[..., 0] = X[..., 0].real / np.sqrt(n)
    kmax = (n - 1) // 2
    scale = np.sqrt(2.0 / n)
    alpha[..., 1:2 * kmax + 1:2] = scale * X[..., 1:kmax + 1].real
    alpha[..., 2:2 * kmax + 2:2] = -scale * X[..., 1:kmax + 1].imag
    if n % 2 == 0 and n > 1:
        alpha[..., -1] = X[..., n // 2].real / np.sqrt(n)
    return alpha


def _fourier_synthesize(alpha):
    n = alpha.shape[-1]
    X = np.zeros(alpha.shape[:-1] + (n // 2 + 1,), dtype=complex)
    X[..., 0] = alpha[..., 0] * np.sqrt(n)
    kmax = (n - 1) // 2
    scale = np.sqrt(n / 2.0)
    X[..., 1:kmax + 1] = scale * (alpha[..., 1:2 * kmax + 1:2] - 1j * alpha[..., 2:2 * kmax + 2:2])
    if n % 2 == 0 and n > 1:
        X[..., n // 2] = alpha[..., -1] * np.sqrt(n)
    return np.fft.irfft(X, n, axis=-1)


@dataclass(frozen=True)
class Orthobasis:
    id: BasisId
    n: int

    def __post_init__(self):
        object.__setattr__(self, "id", BasisId(self.id))
        if self.n < 1:
            raise DimensionError(f"n must be >= 1, got {self.n}")
        if self.id is BasisId.HAAR and not _is_pow2(self.n):
            raise InvalidParameterError(f"Haar basis needs a power-of-two n, got {self.n}")

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.n:
            raise DimensionError(f"expected length {self.n}, got {v.shape[-1]}")
        return v

    def synthesize(self, alpha) -> np.ndarray:
        alpha = self._check(alpha)
        if self.id is BasisId.SPIKES:
            return alpha.copy()
        if self.id is BasisId.HAAR:
            return _haar_synthesize(alpha)
        if self.id is BasisId.DCT:
            return scipy.fft.idct(alpha, type=2, norm="ortho", axis=-1)
        return _fourier_synthesize(alpha)

    def analyze(self, x) -> np.ndarray:
        x = self._check(x)
        if self.id is BasisId.SPIKES:
            return x.copy()
        if self.id is BasisId.HAAR:
            return _haar_analyze(x)
        if self.id is BasisId.DCT:
            return scipy.fft.dct(x, type=2, norm="ortho", axis=-1)
        return _fourier_analyze(x)


def make_basis(basis_id, n: int) -> Orthobasis:
    return Orthobasis(BasisId(basis_id), n)


def synthesize(basis: Orthobasis, alpha) -> np.ndarray:
    return basis.synthesize(alpha)


def analyze(basis: Orthobasis, x) -> np.ndarray:
    return basis.analyze(x)


def dense_matrix(basis: Orthobasis) -> np.ndarray:
    """Columns are the basis atoms (oracle use, small n)."""
    return basis.synthesize(np.eye(basis.n)).T


@dataclass(frozen=True)
class CoherenceValue:
    mu: float
    basis_id: BasisId
    n: int


def coherence(basis: Orthobasis, block: int = 256) -> CoherenceValue:
    """``max |F psi_j|`` over all atoms, F the unnormalized DFT.

    Scans the atoms in blocks so memory stays O(block * n).
    """
    n = basis.n
    if n > COHERENCE_LIMIT:
        raise DimensionError(f"coherence scan refused for n={n} > {COHERENCE_LIMIT}")
    mu = 0.0
    for start in range(0, n, block):
        stop = min(n, start + block)
        coeffs = np.zeros((stop - start, n))
        coeffs[np.arange(stop - start), np.arange(start, stop)] = 1.0
        atoms = basis.synthesize(coeffs)
        mu = max(mu, float(np.max(np.abs(np.fft.fft(atoms, axis=-1)))))
    return CoherenceValue(_snap(mu, n), basis.id, n)


def _snap(mu: float, n: int) -> float:
    for exact in (1.0, math.sqrt(n)):
        if abs(mu - exact) <= COHERENCE_SNAP * exact:
            return exact
    return mu
