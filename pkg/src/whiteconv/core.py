"""Domain types, random waveforms and sparse test instances.

Every generator is a pure function of its parameters and an integer seed.
Streams are produced by a counter-based bit generator (Philox) keyed through
``numpy.random.SeedSequence`` so that per-trial streams can be derived from
``(master_seed, cell, trial)`` without depending on execution order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

__all__ = [
    "DimensionError",
    "InvalidParameterError",
    "NumericalError",
    "Distribution",
    "ProblemDims",
    "Waveform",
    "SupportSet",
    "SignPattern",
    "SparseInstance",
    "make_rng",
    "derive_seed",
    "gen_gaussian_waveform",
    "gen_bernoulli_waveform",
    "gen_bandlimited_waveform",
    "gen_waveform",
    "gen_sparse_instance",
    "sparsify",
    "autocovariance",
]

SINC_LOBES = 32


class DimensionError(ValueError):
    """Raised when vector lengths or problem sizes are inconsistent."""


class InvalidParameterError(ValueError):
    """Raised when a parameter is outside its admissible range."""


class NumericalError(ArithmeticError):
    """Raised when a computation produces non-finite or inconsistent values."""


class Distribution(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"
    BANDLIMITED_GAUSSIAN = "bandlimited"


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProblemDims:
    n: int
    m: int
    S: int
    delta: float = 0.1

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.m <= self.n:
            raise DimensionError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if not 1 <= self.S <= self.n:
            raise DimensionError(f"need 1 <= S <= n, got S={self.S}, n={self.n}")
        if not 0.0 < self.delta < 1.0:
            raise InvalidParameterError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class Waveform:
    """A white random waveform ``h`` together with the recipe that produced it."""

    samples: np.ndarray
    distribution: Distribution
    seed: int
    oversample: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples))
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise DimensionError("waveform samples must be a non-empty 1-D vector")

    @property
    def n(self) -> int:
        return self.samples.size

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "distribution": self.distribution.value,
            "seed": int(self.seed),
            "samples": self.samples.tolist(),
        }
        if self.oversample is not None:
            d["oversample"] = int(self.oversample)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Waveform":
        samples = np.asarray(d["samples"], dtype=float)
        if samples.size != d["n"]:
            raise DimensionError("serialized waveform length does not match n")
        return cls(samples, Distribution(d["distribution"]), int(d["seed"]),
                   d.get("oversample"))

    def regenerate(self) -> "Waveform":
        """Rebuild the waveform from its recipe (distribution, n, seed)."""
        if self.distribution is Distribution.BANDLIMITED_GAUSSIAN:
            return gen_bandlimited_waveform(self.n, self.oversample, self.seed)
        return gen_waveform(self.distribution, self.n, self.seed)


@dataclass(frozen=True)
class SupportSet:
    indices: tuple
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidParameterError("support indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.n):
            raise InvalidParameterError(f"support indices must lie in [0, {self.n})")

    @property
    def S(self) -> int:
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)


@dataclass(frozen=True)
class SignPattern:
    signs: tuple

    def __post_init__(self):
        s = tuple(int(v) for v in self.signs)
        if any(v not in (1, -1) for v in s):
            raise InvalidParameterError("signs must be +1 or -1")
        object.__setattr__(self, "signs", s)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.signs, dtype=float)


@dataclass(frozen=True)
class SparseInstance:
    """An S-sparse coefficient vector described by support, signs and magnitudes."""

    support: SupportSet
    signs: SignPattern
    coefficients: np.ndarray
    basis_id: str = "spikes"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _frozen(self.coefficients))
        if self.support.S == 0:
            raise InvalidParameterError("a sparse instance needs at least one nonzero")
        if len(self.signs.signs) != self.support.S:
            raise DimensionError("sign pattern length does not match the support size")
        if self.coefficients.shape != (self.support.S,):
            raise DimensionError("need one magnitude per support index")
        if np.any(self.coefficients <= 0):
            raise InvalidParameterError("magnitudes must be strictly positive")

    @property
    def n(self) -> int:
        return self.support.n

    @property
    def S(self) -> int:
        return self.support.S

    def densify(self) -> np.ndarray:
        alpha = np.zeros(self.n)
        alpha[self.support.as_array()] = self.signs.as_array() * self.coefficients
        return alpha

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "basis_id": self.basis_id,
            "support": list(self.support.indices),
            "signs": list(self.signs.signs),
            "coefficients": self.coefficients.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SparseInstance":
        return cls(SupportSet(tuple(d["support"]), int(d["n"])),
                   SignPattern(tuple(d["signs"])),
                   np.asarray(d["coefficients"], dtype=float),
                   d.get("basis_id", "spikes"))

    def __eq__(self, other):
        if not isinstance(other, SparseInstance):
            return NotImplemented
        return (self.support == other.support and self.signs == other.signs
                and self.basis_id == other.basis_id
                and np.array_equal(self.coefficients, other.coefficients))

    __hash__ = None


def sparsify(alpha, basis_id: str = "spikes") -> SparseInstance:
    """Inverse of :meth:`SparseInstance.densify`."""
    alpha = np.asarray(alpha, dtype=float)
    idx = np.flatnonzero(alpha)
    return SparseInstance(SupportSet(tuple(idx), alpha.size),
                          SignPattern(tuple(np.sign(alpha[idx]).astype(int))),
                          np.abs(alpha[idx]), basis_id)


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream addressed by ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed for the sub-stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _check_length(n: int) -> None:
    if n < 1:
        raise DimensionError(f"waveform length must be >= 1, got {n}")


def gen_gaussian_waveform(n: int, seed: int) -> Waveform:
    _check_length(n)
    return Waveform(make_rng(seed).standard_normal(n), Distribution.GAUSSIAN, seed)


def gen_bernoulli_waveform(n: int, seed: int) -> Waveform:
    _check_length(n)
    bits = make_rng(seed).integers(0, 2, size=n)
    return Waveform(2.0 * bits - 1.0, Distribution.BERNOULLI, seed)


def _sinc_kernel(oversample: int) -> np.ndarray:
    """Sinc weights on the fine grid, truncated at ``SINC_LOBES`` lobes each side."""
    half = SINC_LOBES * oversample
    return np.sinc(np.arange(-half, half + 1) / oversample)


def gen_bandlimited_waveform(n: int, oversample: int, seed: int) -> Waveform:
    """Sample the sinc-filtered continuous white noise at integer lags.

    White noise is approximated on a fine grid of spacing ``1/oversample``
    that extends past both ends of the window, so the truncated filter never
    wraps. Each output is normalized by the filter energy, which makes its
    variance exactly one.
    """
    _check_length(n)
    if oversample is None or int(oversample) != oversample or oversample < 2:
        raise InvalidParameterError(f"oversample must be an integer >= 2, got {oversample}")
    oversample = int(oversample)
    kernel = _sinc_kernel(oversample)
    noise = make_rng(seed).standard_normal((n - 1) * oversample + kernel.size)
    # kernel is symmetric, so convolution equals correlation
    fine = fftconvolve(noise, kernel, mode="valid")
    samples = fine[::oversample] / np.sqrt(np.sum(kernel ** 2))
    return Waveform(samples, Distribution.BANDLIMITED_GAUSSIAN, seed, oversample)


def gen_waveform(distribution, n: int, seed: int, oversample: int = 4) -> Waveform:
    distribution = Distribution(distribution)
    if distribution is Distribution.GAUSSIAN:
        return gen_gaussian_waveform(n, seed)
    if distribution is Distribution.BERNOULLI:
        return gen_bernoulli_waveform(n, seed)
    return gen_bandlimited_waveform(n, oversample, seed)


def gen_sparse_instance(n: int, S: int, magnitude_law="unit", seed: int = 0,
                        basis_id: str = "spikes") -> SparseInstance:
    """Uniform random support of size S, i.i.d. fair signs, magnitudes per law.

    ``magnitude_law`` is ``"unit"`` or a pair ``(a, b)`` with ``0 < a < b``
    for magnitudes drawn uniformly from ``[a, b)``.
    """
    if n < 1:
        raise DimensionError(f"n must be >= 1, got {n}")
    if not 1 <= S <= n:
        raise InvalidParameterError(f"need 1 <= S <= n, got S={S}, n={n}")
    rng = make_rng(seed)
    support = np.sort(rng.choice(n, size=S, replace=False))
    signs = 2 * rng.integers(0, 2, size=S) - 1
    if isinstance(magnitude_law, str):
        if magnitude_law != "unit":
            raise InvalidParameterError(f"unknown magnitude law {magnitude_law!r}")
        mags = np.ones(S)
    else:
        a, b = magnitude_law
        if not 0 < a < b:
            raise InvalidParameterError("uniform magnitude law needs 0 < a < b")
        mags = rng.uniform(a, b, size=S)
    return SparseInstance(SupportSet(tuple(support), n), SignPattern(tuple(signs)),
                          mags, basis_id)


def autocovariance(x, lags: Sequence[int] | int) -> np.ndarray:
    """Circular sample autocovariance ``mean(x[t] * x[t+k])`` of a zero-mean model."""
    x = np.asarray(x, dtype=float)
    lags = np.atleast_1d(lags)
    return np.array([np.mean(x * np.roll(x, -int(k))) for k in lags])
