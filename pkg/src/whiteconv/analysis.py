"""Closed-form tail and measurement bounds, and Monte Carlo checks against them.

Tail bounds (``mu`` is the coherence with the unnormalized DFT)::

    ensemble   variant         bound                           valid for r >
    gaussian   fixed_vector    e^2 exp(-m r / (2 mu^2 S))             2 mu^2 S / m
    gaussian   fixed_support   e^2 S^2 exp(-m r / (4 mu^2 S))         4 mu^2 S / m
    gaussian   any_support     C(n,S) * fixed_support                 4 mu^2 S / m
    bernoulli  fixed_vector    2 e^2 exp(-m r / (16 mu^2 S))         32 mu^2 S / m
    bernoulli  fixed_support   2 e^2 S^2 exp(-m r / (32 mu^2 S))     64 mu^2 S / m
    bernoulli  any_support     C(n,S) * fixed_support                64 mu^2 S / m

The Bernoulli fixed-vector row substitutes ``mu^2 S`` for the squared norm
of the shifted-signal matrix, as in the Gaussian case.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import gammaln

from .bases import Orthobasis, coherence
from .core import (InvalidParameterError, SupportSet, gen_sparse_instance,
                   gen_waveform, derive_seed)
from .operators import SensingOperator, make_subsample_set
from .recovery import sensing_block

__all__ = [
    "Ensemble",
    "Variant",
    "TailBoundQuery",
    "BoundEvaluation",
    "tail_bound",
    "measurement_bound",
    "sharp_measurement_bound",
    "theorem_shape",
    "fit_constant_k",
    "ConcentrationRow",
    "ConcentrationStudy",
    "concentration_samples",
    "empirical_concentration",
    "eigenvalue_extremes",
    "EigenvalueStudy",
    "eigenvalue_deviation_study",
    "CSV_FIELDS",
]

CSV_FIELDS = ("variant", "ensemble", "n", "m", "S", "mu", "r", "empirical", "bound", "stderr", "valid")


class Ensemble(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"


class Variant(str, enum.Enum):
    FIXED_VECTOR = "fixed_vector"
    FIXED_SUPPORT = "fixed_support"
    ANY_SUPPORT = "any_support"


# (log prefactor, exponent denominator, threshold numerator); S^2 and C(n,S) added per variant
_CONSTANTS = {
    (Ensemble.GAUSSIAN, Variant.FIXED_VECTOR): (2.0, 2.0, 2.0),
    (Ensemble.GAUSSIAN, Variant.FIXED_SUPPORT): (2.0, 4.0, 4.0),
    (Ensemble.BERNOULLI, Variant.FIXED_VECTOR): (2.0 + math.log(2.0), 16.0, 32.0),
    (Ensemble.BERNOULLI, Variant.FIXED_SUPPORT): (2.0 + math.log(2.0), 32.0, 64.0),
}


@dataclass(frozen=True)
class TailBoundQuery:
    m: int
    S: int
    n: int
    mu: float
    r: float
    ensemble: Ensemble = Ensemble.GAUSSIAN
    variant: Variant = Variant.FIXED_VECTOR

    def __post_init__(self):
        object.__setattr__(self, "ensemble", Ensemble(self.ensemble))
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.m < 1 or self.n < 1 or not 1 <= self.S <= self.n:
            raise InvalidParameterError("need m >= 1 and 1 <= S <= n")
        if self.mu < 1:
            raise InvalidParameterError(f"coherence must be >= 1, got {self.mu}")
        if self.r < 0:
            raise InvalidParameterError("deviation level r must be >= 0")


@dataclass(frozen=True)
class BoundEvaluation:
    probability_bound: float
    validity_threshold: float
    valid: bool
    log_bound: float


def _log_binom(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def tail_bound(q: TailBoundQuery) -> BoundEvaluation:
    """Evaluate the deviation-probability bound selected by ``q``.

    >>> ev = tail_bound(TailBoundQuery(m=128, S=4, n=256, mu=1.0, r=0.5))
    >>> round(ev.probability_bound, 6)
    0.002479
    """
    base = Variant.FIXED_SUPPORT if q.variant is Variant.ANY_SUPPORT else q.variant
    log_pre, denom, thresh = _CONSTANTS[(q.ensemble, base)]
    scale = q.mu ** 2 * q.S
    log_bound = log_pre - q.m * q.r / (denom * scale)
    if base is Variant.FIXED_SUPPORT:
        log_bound += 2.0 * math.log(q.S)
    if q.variant is Variant.ANY_SUPPORT:
        log_bound += _log_binom(q.n, q.S)
    threshold = thresh * scale / q.m
    prob = math.exp(min(log_bound, 0.0))
    return BoundEvaluation(prob, threshold, q.r > threshold, log_bound)


def _check_theorem_args(n, S, mu, delta, K):
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    if S < 1 or n < 1:
        raise InvalidParameterError("need n >= 1 and S >= 1")
    if mu < 1:
        raise InvalidParameterError(f"coherence must be >= 1, got {mu}")
    if not K > 0:
        raise InvalidParameterError(f"K must be > 0, got {K}")


def theorem_shape(n: int, S: int, mu: float, delta: float, ensemble=Ensemble.GAUSSIAN) -> float:
    """Measurement-count expression without the unknown constant K."""
    ensemble = Ensemble(ensemble)
    L = math.log(n / delta)
    if ensemble is Ensemble.GAUSSIAN:
        return mu ** 2 * S * L ** 0.5 * max(math.log(2 * math.e ** 2 * (S + 1) ** 2), L)
    return mu ** 2 * S * L ** 1.5 * max(math.log(4 * math.e ** 2 * (S + 1) ** 2), L)


def measurement_bound(n: int, S: int, mu: float, delta: float, ensemble=Ensemble.GAUSSIAN,
                      K: float = 1.0) -> int:
    """Smallest measurement count (ceiling) demanded by the recovery theorem.

    Gaussian waveforms use ``log(n/delta)^(1/2)`` with ``log(2e^2(S+1)^2)``;
    Bernoulli waveforms use ``log(n/delta)^(3/2)`` with ``log(4e^2(S+1)^2)``.
    """
    _check_theorem_args(n, S, mu, delta, K)
    return int(math.ceil(K * theorem_shape(n, S, mu, delta, ensemble)))


def sharp_measurement_bound(n: int, S: int, mu: float, delta: float) -> float:
    """Explicit-constant Gaussian requirement
    ``4 mu^2 (S+1) (1 + sqrt(2 log(4n/delta))) log(2 e^2 (S+1)^2 n / delta)``."""
    _check_theorem_args(n, S, mu, delta, 1.0)
    return (4 * mu ** 2 * (S + 1) * (1 + math.sqrt(2 * math.log(4 * n / delta)))
            * math.log(2 * math.e ** 2 * (S + 1) ** 2 * n / delta))


def fit_constant_k(points, n: int, mu: float, delta: float, ensemble=Ensemble.GAUSSIAN):
    """Least-squares K for ``m ~ K * theorem_shape(S)`` through ``(S, m)`` points.

    Returns ``(K, rms_residual)``.
    """
    pts = [(float(S), float(m)) for S, m in points]
    if not pts:
        raise InvalidParameterError("need at least one contour point")
    f = np.array([theorem_shape(n, int(S), mu, delta, ensemble) for S, _ in pts])
    m = np.array([m for _, m in pts])
    K = float(f @ m / (f @ f))
    resid = float(np.sqrt(np.mean((m - K * f) ** 2)))
    return K, resid


@dataclass(frozen=True)
class ConcentrationRow:
    variant: str
    ensemble: str
    n: int
    m: int
    S: int
    mu: float
    r: float
    empirical: float
    bound: float
    stderr: float
    valid: bool

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ConcentrationStudy:
    rows: tuple
    mean_R: float
    samples: np.ndarray
    trials: int

    @property
    def mean_R_stderr(self) -> float:
        return float(np.std(self.samples, ddof=1) / np.sqrt(self.trials))


def _unit_signal(basis: Orthobasis, S: int, seed: int) -> tuple:
    inst = gen_sparse_instance(basis.n, S, "unit", derive_seed(seed, 0), basis.id.value)
    alpha = inst.densify() / np.sqrt(S)
    return inst, basis.synthesize(alpha)


def concentration_samples(n, S, basis: Orthobasis, ensemble, omega, trials, seed) -> np.ndarray:
    """``R = ||H^Omega x0||^2 / m`` for a fixed unit-norm S-sparse ``x0``,
    one fresh waveform per trial."""
    _, x0 = _unit_signal(basis, S, seed)
    X0 = np.fft.fft(x0)
    idx = omega.as_array()
    R = np.empty(trials)
    for t in range(trials):
        h = gen_waveform(ensemble, n, derive_seed(seed, 1, t)).samples
        full = np.fft.ifft(np.conj(np.fft.fft(h)) * X0).real
        R[t] = np.sum(full[idx] ** 2) / omega.m
    return R


def empirical_concentration(n: int, S: int, basis: Orthobasis, ensemble, omega_scheme, m: int,
                            r_grid, trials: int, seed: int, variant=Variant.FIXED_VECTOR,
                            explicit_indices=None, mu: float | None = None) -> ConcentrationStudy:
    """Empirical ``Pr(|R - 1| > r)`` over waveform draws, next to the bound.

    The support and signs are drawn once from ``seed``; only the waveform
    changes between trials.
    """
    if trials < 100:
        raise InvalidParameterError(f"need at least 100 trials, got {trials}")
    ensemble = Ensemble(ensemble)
    variant = Variant(variant)
    omega = make_subsample_set(n, m, omega_scheme, explicit_indices)
    if mu is None:
        mu = coherence(basis).mu
    R = concentration_samples(n, S, basis, ensemble, omega, trials, seed)
    dev = np.abs(R - 1.0)
    rows = []
    for r in r_grid:
        f = float(np.mean(dev > r))
        ev = tail_bound(TailBoundQuery(m, S, n, mu, float(r), ensemble, variant))
        rows.append(ConcentrationRow(variant.value, ensemble.value, n, m, S, float(mu), float(r),
                                     f, ev.probability_bound, math.sqrt(f * (1 - f) / trials),
                                     ev.valid))
    return ConcentrationStudy(tuple(rows), float(np.mean(R)), R, trials)


def eigenvalue_extremes(op: SensingOperator, basis: Orthobasis, T: SupportSet) -> tuple:
    """Extreme eigenvalues of ``(1/m) U_T^T U_T``."""
    U = sensing_block(op, basis, T)
    ev = np.linalg.eigvalsh(U.T @ U / op.m)
    lo = 0.0 if T.S > op.m else max(float(ev[0]), 0.0)
    return lo, float(ev[-1])


@dataclass(frozen=True)
class EigenvalueStudy:
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    r: float
    empirical: float
    bound: float
    stderr: float
    valid: bool


def eigenvalue_deviation_study(n: int, S: int, m: int, basis: Orthobasis, ensemble, r: float,
                               trials: int, seed: int, omega_scheme="equal") -> EigenvalueStudy:
    """Frequency of ``lambda_min < 1 - r`` or ``lambda_max > 1 + r`` for a fixed
    support, with the fixed-support bound at the same ``r``."""
    ensemble = Ensemble(ensemble)
    omega = make_subsample_set(n, m, omega_scheme)
    inst = gen_sparse_instance(n, S, "unit", derive_seed(seed, 0), basis.id.value)
    lo = np.empty(trials)
    hi = np.empty(trials)
    for t in range(trials):
        op = SensingOperator(gen_waveform(ensemble, n, derive_seed(seed, 1, t)), omega)
        lo[t], hi[t] = eigenvalue_extremes(op, basis, inst.support)
    f = float(np.mean((lo < 1 - r) | (hi > 1 + r)))
    ev = tail_bound(TailBoundQuery(m, S, n, coherence(basis).mu, r, ensemble,
                                   Variant.FIXED_SUPPORT))
    return EigenvalueStudy(lo, hi, r, f, ev.probability_bound,
                           math.sqrt(f * (1 - f) / trials), ev.valid)
