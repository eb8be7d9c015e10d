"""Circulant sensing operators built from a white waveform.

The convolution matrix uses the row arrangement whose first row is ``h``
itself and whose row ``k`` is ``h`` cyclically shifted right by ``k``::

    H[k, j] = h[(j - k) mod n]

so ``(H x)[k] = sum_i h[i] x[(i + k) mod n]``. The DFT convention is the
unnormalized forward transform ``F[j, k] = exp(-2i pi j k / n)``, i.e.
``numpy.fft.fft``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import DimensionError, InvalidParameterError, NumericalError, Waveform

__all__ = [
    "Scheme",
    "SubsampleSet",
    "SensingOperator",
    "ShiftMatrix",
    "circular_convolve",
    "build_dense_H",
    "apply_sensing",
    "apply_adjoint",
    "circulant_operator_norm",
    "make_subsample_set",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 4096
IMAG_RESIDUE_TOL = 1e-10


class Scheme(str, enum.Enum):
    EQUAL_INTERVAL = "equal"
    EXPLICIT_FIXED = "explicit"


@dataclass(frozen=True)
class SubsampleSet:
    indices: tuple
    n: int
    scheme: Scheme = Scheme.EXPLICIT_FIXED

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not idx:
            raise InvalidParameterError("subsample set must be non-empty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidParameterError("subsample indices must be distinct and increasing")
        if idx[0] < 0 or idx[-1] >= self.n:
            raise InvalidParameterError(f"subsample indices must lie in [0, {self.n})")
        if self.scheme is Scheme.EQUAL_INTERVAL:
            m = len(idx)
            if self.n % m or idx != tuple(range(0, self.n, self.n // m)):
                raise InvalidParameterError("not an equal-interval pattern")

    @property
    def m(self) -> int:
        return len(self.indices)

    @property
    def step(self) -> int | None:
        return self.n // self.m if self.scheme is Scheme.EQUAL_INTERVAL else None

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)


def make_subsample_set(n: int, m: int, scheme="equal", explicit_indices=None) -> SubsampleSet:
    """Validated set of ``m`` fixed row positions out of ``n``.

    >>> make_subsample_set(8, 4).indices
    (0, 2, 4, 6)
    """
    scheme = Scheme(scheme)
    if not 1 <= m <= n:
        raise InvalidParameterError(f"need 1 <= m <= n, got m={m}, n={n}")
    if scheme is Scheme.EQUAL_INTERVAL:
        if n % m:
            raise InvalidParameterError(f"equal-interval sampling needs m | n ({n} mod {m} != 0)")
        return SubsampleSet(tuple(range(0, n, n // m)), n, scheme)
    if explicit_indices is None:
        raise InvalidParameterError("explicit scheme needs explicit_indices")
    idx = [int(i) for i in explicit_indices]
    if len(idx) != m:
        raise InvalidParameterError(f"expected {m} explicit indices, got {len(idx)}")
    if len(set(idx)) != m:
        raise InvalidParameterError("duplicate subsample indices")
    if min(idx) < 0 or max(idx) >= n:
        raise InvalidParameterError(f"subsample indices must lie in [0, {n})")
    return SubsampleSet(tuple(sorted(idx)), n, scheme)


def _real(z: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(z.real), initial=0.0)))
    if np.max(np.abs(z.imag), initial=0.0) > IMAG_RESIDUE_TOL * scale:
        raise NumericalError("imaginary residue in a real circular convolution")
    return z.real


def circular_convolve(h, x) -> np.ndarray:
    """``H x`` for the circulant ``H`` generated by ``h``, in O(n log n).

    Works along the last axis, so ``x`` may hold a batch of signals.
    """
    h = np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=float)
    if h.ndim != 1 or x.shape[-1] != h.size:
        raise DimensionError(f"length mismatch: |h|={h.size}, |x|={x.shape[-1]}")
    z = np.fft.ifft(np.conj(np.fft.fft(h)) * np.fft.fft(x, axis=-1), axis=-1)
    return _real(z)


def build_dense_H(h) -> np.ndarray:
    """Dense circulant ``H`` (oracle only; refuses n > DENSE_LIMIT)."""
    h = np.asarray(h, dtype=float)
    n = h.size
    if n > DENSE_LIMIT:
        raise DimensionError(f"dense oracle refused for n={n} > {DENSE_LIMIT}")
    j = np.arange(n)
    return h[(j[None, :] - j[:, None]) % n]


@dataclass(frozen=True)
class ShiftMatrix:
    """Cyclic row shift ``D``; ``v @ D`` moves every entry one place to the right."""

    n: int

    def apply_right(self, v, power: int = 1) -> np.ndarray:
        return np.roll(np.asarray(v), power, axis=-1)

    def dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise DimensionError(f"dense oracle refused for n={self.n}")
        return np.roll(np.eye(self.n), 1, axis=1)


@dataclass(frozen=True)
class SensingOperator:
    """``H^Omega``: circular convolution with ``h`` followed by keeping rows ``Omega``."""

    waveform: Waveform
    omega: SubsampleSet
    spectrum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.omega.n != self.waveform.n:
            raise DimensionError("waveform and subsample set disagree on n")
        spec = np.fft.fft(self.waveform.samples)
        spec.setflags(write=False)
        object.__setattr__(self, "spectrum", spec)

    @property
    def n(self) -> int:
        return self.waveform.n

    @property
    def m(self) -> int:
        return self.omega.m

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionError(f"expected length {self.n}, got {x.shape[-1]}")
        full = _real(np.fft.ifft(np.conj(self.spectrum) * np.fft.fft(x, axis=-1), axis=-1))
        return full[..., self.omega.as_array()]

    def adjoint(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.m:
            raise DimensionError(f"expected length {self.m}, got {y.shape[-1]}")
        filled = np.zeros(y.shape[:-1] + (self.n,))
        filled[..., self.omega.as_array()] = y
        return _real(np.fft.ifft(self.spectrum * np.fft.fft(filled, axis=-1), axis=-1))

    def gram_eigenvalues(self) -> np.ndarray | None:
        """Eigenvalues of ``H^Omega (H^Omega)^T`` in m-point DFT order.

        Only equal-interval sampling keeps the m x m Gram circulant; for any
        other pattern ``None`` is returned.
        """
        step = self.omega.step
        if step is None:
            return None
        autocorr = np.fft.ifft(np.abs(self.spectrum) ** 2).real
        return np.fft.fft(autocorr[::step]).real

    def dense(self) -> np.ndarray:
        """Dense ``H^Omega`` for oracles (n <= DENSE_LIMIT)."""
        return build_dense_H(self.waveform.samples)[self.omega.as_array()]


def apply_sensing(op: SensingOperator, x) -> np.ndarray:
    return op.forward(x)


def apply_adjoint(op: SensingOperator, y) -> np.ndarray:
    return op.adjoint(y)


def circulant_operator_norm(l) -> float:
    """Spectral norm of the circulant generated by ``l``: ``max |F l|``."""
    l = np.asarray(l, dtype=float)
    if l.size == 0:
        raise DimensionError("empty vector")
    return float(np.max(np.abs(np.fft.fft(l))))
