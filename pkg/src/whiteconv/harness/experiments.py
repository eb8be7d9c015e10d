"""Experiment orchestration.

Work is split into independent ``(cell, trial)`` items. Each item derives its
random streams from ``(seed, S, m, trial)``, so results do not depend on the
worker count or on execution order; they are merged back in item order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .. import analysis
from ..bases import coherence, make_basis
from ..core import InvalidParameterError, derive_seed, gen_sparse_instance, gen_waveform
from ..operators import SensingOperator, make_subsample_set
from ..recovery import adjudicate, basis_pursuit, dual_certificate
from .config import ExperimentConfig, parse_omega, read_indices
from .imaging import run_coded_aperture, synthetic_scene
from .io import read_csv, read_pgm, write_pgm, write_records

__all__ = [
    "PhaseTransitionCell",
    "CertificateCell",
    "PT_FIELDS",
    "CERT_FIELDS",
    "BOUNDS_FIELDS",
    "CODED_FIELDS",
    "run_trials",
    "run_phase_transition",
    "run_certificate",
    "run_concentration",
    "run_bounds_report",
    "run_coded_aperture_experiment",
    "contour_points",
    "write_phase_transition",
    "run_experiment",
]

log = logging.getLogger(__name__)

PT_FIELDS = ("n", "m", "S", "trials", "successes", "success_rate", "stderr",
             "mean_relative_error", "mean_certificate_sup", "reliable", "status")
CERT_FIELDS = ("n", "m", "S", "trials", "certified", "indeterminate", "exact",
               "certified_not_exact", "mean_certificate_sup", "status")
BOUNDS_FIELDS = ("kind", "ensemble", "n", "S", "mu", "delta", "K", "m_bound", "m_sharp",
                 "residual", "points")
CODED_FIELDS = ("seed", "side", "rate", "mask", "noise_db", "relative_error",
                "backprojection_error", "psnr", "backprojection_psnr", "iterations", "converged")


@dataclass(frozen=True)
class PhaseTransitionCell:
    n: int
    m: int
    S: int
    trials: int
    successes: int
    success_rate: float
    mean_relative_error: float | None
    mean_certificate_sup: float | None = None
    reliable: bool = False
    status: str = "ok"

    @property
    def stderr(self) -> float:
        if not self.trials:
            return 0.0
        p = self.success_rate
        return math.sqrt(p * (1 - p) / self.trials)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["stderr"] = self.stderr
        return d


@dataclass(frozen=True)
class CertificateCell:
    n: int
    m: int
    S: int
    trials: int
    certified: int
    indeterminate: int
    exact: int
    certified_not_exact: int
    mean_certificate_sup: float | None
    status: str = "ok"

    def as_dict(self) -> dict:
        return asdict(self)


def run_trials(fn, items, workers: int = 1) -> list:
    """``[fn(i) for i in items]``, optionally spread over worker processes."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _omega(cfg: ExperimentConfig, m: int):
    scheme, path = parse_omega(cfg.omega)
    if scheme == "equal":
        return make_subsample_set(cfg.n, m, "equal")
    return make_subsample_set(cfg.n, m, "explicit", read_indices(path))


def _magnitude_law(spec: str):
    if spec == "unit":
        return "unit"
    if spec.startswith("uniform:"):
        a, b = (float(v) for v in spec[len("uniform:"):].split(","))
        return (a, b)
    raise InvalidParameterError(f"magnitude must be 'unit' or 'uniform:a,b', got {spec!r}")


def _valid_cells(cfg: ExperimentConfig):
    """Yield ``(S, m, omega or None)`` over the grid; None marks a skipped cell."""
    for S in cfg.s_grid:
        for m in cfg.m_grid:
            omega = None
            if S <= cfg.n and m <= cfg.n:
                try:
                    omega = _omega(cfg, m)
                except InvalidParameterError as exc:
                    log.info("skipping cell S=%d m=%d: %s", S, m, exc)
            yield S, m, omega


def _instance_trial(item):
    """One sense/solve/adjudicate round; returns a plain tuple for pickling."""
    cfg, S, m, omega, t, with_cert = item
    n = cfg.n
    wave = gen_waveform(cfg.ensemble, n, derive_seed(cfg.seed, S, m, t, 0))
    inst = gen_sparse_instance(n, S, _magnitude_law(cfg.magnitude),
                               derive_seed(cfg.seed, S, m, t, 1), cfg.basis)
    basis = make_basis(cfg.basis, n)
    op = SensingOperator(wave, omega)
    solver = cfg.solver_config()
    y = op.forward(basis.synthesize(inst.densify()))
    res = basis_pursuit(y, op, basis, solver)
    adj = adjudicate(res.alpha_hat, inst, solver.exact_tol)
    sup, certified, indeterminate = None, False, False
    if with_cert:
        cert = dual_certificate(op, basis, inst.support, inst.signs)
        sup = cert.sup_offsupport if cert.gram_condition_ok else None
        certified, indeterminate = cert.certifies, cert.indeterminate
    return adj.exact, adj.relative_error, sup, certified, indeterminate


def _grid_items(cfg, with_cert):
    cells, items = [], []
    for S, m, omega in _valid_cells(cfg):
        cells.append((S, m, omega))
        if omega is not None:
            items.extend((cfg, S, m, omega, t, with_cert) for t in range(cfg.trials))
    return cells, items


def _mean(vals):
    vals = [v for v in vals if v is not None and np.isfinite(v)]
    return float(np.mean(vals)) if vals else None


def run_phase_transition(cfg: ExperimentConfig) -> list:
    """Success rate of l1 recovery over the (m, S) grid."""
    cells, items = _grid_items(cfg, cfg.certificate)
    results = iter(run_trials(_instance_trial, items, cfg.workers))
    out = []
    for S, m, omega in cells:
        if omega is None:
            out.append(PhaseTransitionCell(cfg.n, m, S, 0, 0, 0.0, None, None, False, "skipped"))
            continue
        rows = [next(results) for _ in range(cfg.trials)]
        succ = sum(r[0] for r in rows)
        rate = succ / cfg.trials
        out.append(PhaseTransitionCell(
            cfg.n, m, S, cfg.trials, succ, rate, _mean(r[1] for r in rows),
            _mean(r[2] for r in rows) if cfg.certificate else None,
            rate >= cfg.success_level))
    return out


def run_certificate(cfg: ExperimentConfig) -> list:
    """Joint Monte Carlo of the least-squares dual certificate and the solver."""
    cells, items = _grid_items(cfg, True)
    results = iter(run_trials(_instance_trial, items, cfg.workers))
    out = []
    for S, m, omega in cells:
        if omega is None:
            out.append(CertificateCell(cfg.n, m, S, 0, 0, 0, 0, 0, None, "skipped"))
            continue
        rows = [next(results) for _ in range(cfg.trials)]
        out.append(CertificateCell(
            cfg.n, m, S, cfg.trials,
            certified=sum(r[3] for r in rows),
            indeterminate=sum(r[4] for r in rows),
            exact=sum(r[0] for r in rows),
            certified_not_exact=sum(r[3] and not r[0] for r in rows),
            mean_certificate_sup=_mean(r[2] for r in rows)))
    return out


def contour_points(cells, level: float = 0.5) -> list:
    """``(S, m)`` where each S row first reaches ``level``, linearly
    interpolated between neighbouring m values."""
    rows = {}
    for c in cells:
        if c.status == "ok":
            rows.setdefault(c.S, []).append((c.m, c.success_rate))
    pts = []
    for S in sorted(rows):
        seq = sorted(rows[S])
        for (m0, p0), (m1, p1) in zip(seq, seq[1:]):
            if p0 < level <= p1:
                pts.append((S, m0 + (level - p0) * (m1 - m0) / (p1 - p0)))
                break
        else:
            if seq and seq[0][1] >= level:
                pts.append((S, float(seq[0][0])))
    return pts


def _cells_from_csv(path) -> list:
    out = []
    for row in read_csv(path):
        out.append(PhaseTransitionCell(
            int(row["n"]), int(row["m"]), int(row["S"]), int(row["trials"]),
            int(row["successes"]), float(row["success_rate"]), None, None,
            row.get("reliable") == "true", row.get("status", "ok")))
    return out


def run_bounds_report(cfg: ExperimentConfig) -> list:
    """Theorem measurement counts over the S grid for both ensembles, the
    explicit-constant Gaussian count, and a fitted K when phase-transition
    data is supplied."""
    mu = coherence(make_basis(cfg.basis, cfg.n)).mu
    rows = []
    for ens in analysis.Ensemble:
        for S in cfg.s_grid:
            rows.append({
                "kind": "theorem", "ensemble": ens.value, "n": cfg.n, "S": S, "mu": mu,
                "delta": cfg.delta, "K": cfg.K,
                "m_bound": analysis.measurement_bound(cfg.n, S, mu, cfg.delta, ens, cfg.K),
                "m_sharp": (analysis.sharp_measurement_bound(cfg.n, S, mu, cfg.delta)
                            if ens is analysis.Ensemble.GAUSSIAN else None),
            })
    if cfg.pt_data:
        cells = _cells_from_csv(cfg.pt_data)
        pts = contour_points(cells, cfg.contour_level)
        if pts:
            n = cells[0].n
            K, resid = analysis.fit_constant_k(pts, n, mu, cfg.delta, cfg.ensemble)
            rows.append({
                "kind": "fitted_K", "ensemble": cfg.ensemble, "n": n, "mu": mu,
                "delta": cfg.delta, "K": K, "residual": resid,
                "points": ";".join(f"{S}:{m!r}" for S, m in pts),
            })
    return rows


def run_concentration(cfg: ExperimentConfig):
    """Concentration tables over every (m, S) pair of the grid."""
    scheme, path = parse_omega(cfg.omega)
    explicit = read_indices(path) if path else None
    basis = make_basis(cfg.basis, cfg.n)
    mu = coherence(basis).mu
    rows, summary = [], []
    for S in cfg.s_grid:
        for m in cfg.m_grid:
            study = analysis.empirical_concentration(
                cfg.n, S, basis, cfg.ensemble, scheme, m, cfg.r_grid, cfg.trials, cfg.seed,
                cfg.variant, explicit, mu)
            rows.extend(r.as_dict() for r in study.rows)
            summary.append({"m": m, "S": S, "mean_R": study.mean_R,
                            "mean_R_stderr": study.mean_R_stderr})
    return rows, summary


def run_coded_aperture_experiment(cfg: ExperimentConfig, image_out=None) -> list:
    """One coded-aperture run per trial; trial t uses seed ``derive_seed(seed, t)``."""
    image = read_pgm(cfg.image) if cfg.image else synthetic_scene(cfg.side)
    rows = []
    for t in range(cfg.trials):
        s = derive_seed(cfg.seed, t)
        res = run_coded_aperture(image, cfg.ensemble, cfg.rate, cfg.solver_config(), s,
                                 cfg.noise_db)
        rows.append({"seed": s, "side": image.shape[0], "rate": cfg.rate, "mask": cfg.ensemble,
                     "noise_db": cfg.noise_db, **res.metrics()})
        if image_out is not None and t == 0:
            write_pgm(image_out, res.reconstruction)
    return rows


def write_phase_transition(cells, cfg: ExperimentConfig, path=None) -> str:
    return write_records([c.as_dict() for c in cells], PT_FIELDS, path, cfg.format, cfg.echo())


def run_experiment(cfg: ExperimentConfig, out=None, image_out=None) -> str:
    """Run ``cfg.experiment`` and persist to ``out`` (default ``cfg.out``)."""
    out = out if out is not None else cfg.out
    kind = cfg.experiment.value
    summary = None
    if kind == "phase-transition":
        recs, header = [c.as_dict() for c in run_phase_transition(cfg)], PT_FIELDS
    elif kind == "certificate":
        recs, header = [c.as_dict() for c in run_certificate(cfg)], CERT_FIELDS
    elif kind == "concentration":
        recs, summary = run_concentration(cfg)
        header = analysis.CSV_FIELDS
    elif kind == "bounds":
        recs, header = run_bounds_report(cfg), BOUNDS_FIELDS
    else:
        recs, header = run_coded_aperture_experiment(cfg, image_out), CODED_FIELDS
    return write_records(recs, header, out, cfg.format, cfg.echo(),
                         {"tables": summary} if summary else None)
