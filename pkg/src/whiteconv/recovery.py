"""l1 recovery, exact-recovery adjudication and dual certificates.

The solver handles

    minimize ||alpha||_1  subject to  ||y - A alpha|| <= eps,   A = H^Omega Psi,

with ``eps = residual_radius * ||y||``; the default radius of zero gives the
equality-constrained program. A positive radius is meant for noisy data;
tiny positive radii make ADMM crawl and should be avoided. It is ADMM on the splitting
``alpha = z``: the alpha-step is a Euclidean projection onto the residual
ball, the z-step is soft thresholding. The projection needs solves with
``G + s I`` where ``G = A A^T = H^Omega (H^Omega)^T`` (``Psi`` is orthonormal).
With equal-interval sampling ``G`` is an m x m circulant and is inverted
exactly with m-point FFTs; otherwise conjugate gradients is used. Only
forward/adjoint applications and basis transforms touch the operator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, cg

from .core import DimensionError, InvalidParameterError, NumericalError, SignPattern, SparseInstance, SupportSet

__all__ = [
    "SolverConfig",
    "RecoveryResult",
    "Adjudication",
    "DualCertificate",
    "basis_pursuit",
    "adjudicate",
    "dual_certificate",
    "sensing_block",
    "CERTIFICATE_MARGIN",
    "GRAM_CONDITION_LIMIT",
]

log = logging.getLogger(__name__)

CERTIFICATE_MARGIN = 1e-6
GRAM_CONDITION_LIMIT = 1e12
_PINV_RCOND = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 2000
    primal_tolerance: float = 1e-8
    dual_tolerance: float = 1e-8
    penalty: float = 1.0
    inner_cg_tolerance: float = 1e-10
    inner_cg_max_iters: int = 1000
    exact_tol: float = 1e-4
    residual_radius: float = 0.0

    def __post_init__(self):
        if self.residual_radius < 0:
            raise InvalidParameterError("residual_radius must be >= 0")
        if self.max_iterations < 1 or self.inner_cg_max_iters < 1:
            raise InvalidParameterError("iteration limits must be >= 1")
        for name in ("primal_tolerance", "dual_tolerance", "penalty",
                     "inner_cg_tolerance", "exact_tol"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0")

    def override(self, **kw) -> "SolverConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass(frozen=True)
class Adjudication:
    support_recovered: bool
    signs_recovered: bool
    exact: bool
    relative_error: float


@dataclass
class RecoveryResult:
    alpha_hat: np.ndarray
    iterations: int
    converged: bool
    residual_norm: float
    support_recovered: bool | None = None
    signs_recovered: bool | None = None
    exact: bool | None = None
    relative_error: float | None = None

    def with_truth(self, truth: SparseInstance, exact_tol: float = 1e-4) -> "RecoveryResult":
        adj = adjudicate(self.alpha_hat, truth, exact_tol)
        self.support_recovered = adj.support_recovered
        self.signs_recovered = adj.signs_recovered
        self.exact = adj.exact
        self.relative_error = adj.relative_error
        return self


class _GramSolver:
    """Solves ``(G + s I) c = b`` for ``G = H^Omega (H^Omega)^T``."""

    def __init__(self, op, cfg: SolverConfig):
        self.op = op
        self.cfg = cfg
        eig = op.gram_eigenvalues() if hasattr(op, "gram_eigenvalues") else None
        if eig is not None:
            eig = np.asarray(eig)
            self.eig = np.where(eig > _PINV_RCOND * eig.max(), eig, 0.0)
        else:
            self.eig = None
        self._warm = None

    def _cg(self, b, s):
        m = b.size
        G = LinearOperator((m, m), matvec=lambda v: self.op.forward(self.op.adjoint(v)) + s * v,
                           dtype=float)
        c, info = cg(G, b, x0=self._warm, rtol=self.cfg.inner_cg_tolerance, atol=0.0,
                     maxiter=self.cfg.inner_cg_max_iters)
        if info < 0:
            raise NumericalError("conjugate gradients broke down")
        self._warm = c
        return c

    def ball_correction(self, b, eps: float) -> np.ndarray:
        """``c = (G + s I)^+ b`` with ``s >= 0`` chosen so that ``||s c|| = eps``.

        ``v - A^T c`` is then the projection of ``v`` onto the residual ball,
        where ``b = A v - y`` and ``||b|| > eps``. ``s = 0`` when the ball
        reduces to the affine set (or the misfit cannot go below ``eps``).
        """
        if self.eig is None:
            return self._ball_correction_cg(b, eps)
        g = self.eig
        B = np.fft.fftn(b.reshape(g.shape))
        w = np.abs(B) ** 2 / B.size
        null = g <= 0

        def misfit(s):
            ratio = np.where(null, 1.0, s / (g + s))
            return float(np.sqrt(np.sum(w * ratio ** 2)))

        s = 0.0
        if eps > 0 and misfit(0.0) < eps:
            total = float(np.sqrt(np.sum(w)))
            hi = g.max() * eps / (total - eps)
            while misfit(hi) < eps:
                hi *= 4.0
            lo = hi / 16.0
            while misfit(lo) > eps:
                lo /= 16.0
            s = float(np.exp(brentq(lambda t: misfit(np.exp(t)) - eps, np.log(lo), np.log(hi),
                                    xtol=1e-12, rtol=1e-12)))
        with np.errstate(divide="ignore", invalid="ignore"):
            C = np.where(null, 0.0, B / (g + s))
        return np.fft.ifftn(C).real.reshape(-1)

    def _ball_correction_cg(self, b, eps):
        c0 = self._cg(b, 0.0)
        if eps <= 0:
            return c0
        misfit = lambda s: s * float(np.linalg.norm(self._cg(b, s)))
        nb = float(np.linalg.norm(b))
        hi = float(np.linalg.norm(self.op.forward(self.op.adjoint(b)))) / nb * eps / (nb - eps)
        while misfit(hi) < eps:
            hi *= 4.0
        lo = hi / 16.0
        while misfit(lo) > eps:
            lo /= 16.0
        s = float(np.exp(brentq(lambda t: misfit(np.exp(t)) - eps, np.log(lo), np.log(hi),
                                xtol=1e-10, rtol=1e-10)))
        return self._cg(b, s)


def _project_ball(v, y, eps, A, At, gram: _GramSolver):
    """Euclidean projection of ``v`` onto ``{a : ||A a - y|| <= eps}``."""
    b = A(v) - y
    if np.linalg.norm(b) <= eps:
        return v
    return v - At(gram.ball_correction(b, eps))


def basis_pursuit(y, op, basis, cfg: SolverConfig | None = None) -> RecoveryResult:
    """Solve the l1 recovery program for measurements ``y``.

    Parameters
    ----------
    y : array, shape (m,)
        Measurements.
    op : SensingOperator
        Anything with ``forward``, ``adjoint``, ``n``, ``m`` (and optionally
        ``gram_eigenvalues``).
    basis : Orthobasis
        Sparsity basis; must share ``n`` with ``op``.
    cfg : SolverConfig, optional

    Returns
    -------
    RecoveryResult
        Non-convergence is reported through ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    y = np.asarray(y, dtype=float)
    if y.shape != (op.m,):
        raise DimensionError(f"expected {op.m} measurements, got shape {y.shape}")
    if basis.n != op.n:
        raise DimensionError("operator and basis disagree on n")

    A = lambda a: op.forward(basis.synthesize(a))
    At = lambda r: basis.analyze(op.adjoint(r))
    gram = _GramSolver(op, cfg)
    eps = cfg.residual_radius * float(np.linalg.norm(y))

    n = op.n
    z = np.zeros(n)
    u = np.zeros(n)
    x = z
    rho = cfg.penalty
    thresh = 1.0 / rho
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        x = _project_ball(z - u, y, eps, A, At, gram)
        z_old = z
        z = np.sign(x + u) * np.maximum(np.abs(x + u) - thresh, 0.0)
        u = u + x - z
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise NumericalError(f"non-finite iterate at iteration {it}")

        r_norm = np.linalg.norm(x - z)
        s_norm = rho * np.linalg.norm(z - z_old)
        eps_pri = cfg.primal_tolerance * max(np.linalg.norm(x), np.linalg.norm(z))
        eps_dual = cfg.dual_tolerance * rho * np.linalg.norm(u)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break

    if not converged:
        log.debug("basis pursuit stopped at max_iterations=%d", cfg.max_iterations)
    residual = float(np.linalg.norm(y - A(x)))
    return RecoveryResult(np.array(x), it, converged, residual)


def adjudicate(result_alpha, truth: SparseInstance, exact_tol: float = 1e-4) -> Adjudication:
    """Decide whether ``result_alpha`` recovers ``truth`` exactly.

    Exact means relative l2 error at most ``exact_tol`` and the entries above
    ``exact_tol * max|alpha_hat|`` sit exactly on the true support with the
    true signs.
    """
    alpha = np.asarray(result_alpha, dtype=float)
    alpha0 = truth.densify()
    if alpha.shape != alpha0.shape:
        raise DimensionError("estimate and truth differ in length")
    norm0 = np.linalg.norm(alpha0)
    if norm0 == 0:
        raise InvalidParameterError("truth vector is zero")
    rel = float(np.linalg.norm(alpha - alpha0) / norm0)
    peak = np.max(np.abs(alpha), initial=0.0)
    found = np.flatnonzero(np.abs(alpha) > exact_tol * peak) if peak > 0 else np.array([], int)
    support_ok = np.array_equal(found, truth.support.as_array())
    signs_ok = support_ok and np.array_equal(np.sign(alpha[found]), truth.signs.as_array())
    return Adjudication(bool(support_ok), bool(signs_ok), bool(signs_ok and rel <= exact_tol), rel)


@dataclass(frozen=True)
class DualCertificate:
    pi: np.ndarray
    sup_offsupport: float
    gram_condition_ok: bool
    condition: float

    @property
    def certifies(self) -> bool:
        """Strictly inside the unit ball off the support, with margin."""
        return self.gram_condition_ok and self.sup_offsupport < 1.0 - CERTIFICATE_MARGIN

    @property
    def indeterminate(self) -> bool:
        return self.gram_condition_ok and abs(self.sup_offsupport - 1.0) <= CERTIFICATE_MARGIN


def sensing_block(op, basis, T: SupportSet) -> np.ndarray:
    """Dense m x S block ``U_T^Omega``; column t is ``H^Omega psi_t``."""
    coeffs = np.zeros((T.S, op.n))
    coeffs[np.arange(T.S), T.as_array()] = 1.0
    return op.forward(basis.synthesize(coeffs)).T


def dual_certificate(op, basis, T: SupportSet, z: SignPattern) -> DualCertificate:
    """Least-squares dual vector ``pi = U^T U_T (U_T^T U_T)^-1 z``."""
    if len(z.signs) != T.S:
        raise DimensionError("sign pattern and support differ in size")
    n = op.n
    U_T = sensing_block(op, basis, T)
    gram = U_T.T @ U_T
    cond = float(np.linalg.cond(gram)) if T.S <= op.m else np.inf
    if not np.isfinite(cond) or cond > GRAM_CONDITION_LIMIT:
        return DualCertificate(np.full(n, np.nan), np.inf, False, cond)
    w = np.linalg.solve(gram, z.as_array())
    pi = basis.analyze(op.adjoint(U_T @ w))
    off = np.ones(n, dtype=bool)
    off[T.as_array()] = False
    sup = float(np.max(np.abs(pi[off]), initial=0.0))
    return DualCertificate(pi, sup, True, cond)
