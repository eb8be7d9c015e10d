"""Command-line interface.

Exit codes: 0 success, 1 invalid configuration or input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bases import coherence, make_basis
from .core import (DimensionError, InvalidParameterError, NumericalError, SparseInstance, Waveform,
                   derive_seed, gen_sparse_instance, gen_waveform)
from .harness.config import load_config, parse_omega, read_indices
from .harness.experiments import run_experiment
from .operators import SensingOperator, make_subsample_set
from .recovery import SolverConfig, basis_pursuit

log = logging.getLogger("whiteconv")

EXPERIMENTS = ("phase-transition", "concentration", "certificate", "coded-aperture", "bounds")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat YAML file of key: value settings")
    p.add_argument("--n", type=int)
    p.add_argument("--m", help="measurement count or comma-separated grid")
    p.add_argument("--s", help="sparsity or comma-separated grid")
    p.add_argument("--basis", choices=("spikes", "haar", "dct", "fourier"))
    p.add_argument("--ensemble", choices=("gaussian", "bernoulli", "bandlimited"))
    p.add_argument("--omega", help="'equal' or 'explicit:<file>'")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int)
    p.add_argument("--max-iters", dest="max_iterations", type=int)
    p.add_argument("--tol", dest="primal_tolerance", type=float)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="whiteconv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        _common(p)
        if name == "phase-transition":
            p.add_argument("--certificate", action="store_true", default=None,
                           help="also record the dual-certificate sup-norm")
        if name == "concentration":
            p.add_argument("--r", help="comma-separated deviation grid")
            p.add_argument("--variant", choices=("fixed_vector", "fixed_support", "any_support"))
        if name == "bounds":
            p.add_argument("--delta", type=float)
            p.add_argument("--K", type=float)
            p.add_argument("--pt-data", dest="pt_data", help="phase-transition CSV for fitting K")
            p.add_argument("--contour-level", dest="contour_level", type=float)
        if name == "coded-aperture":
            p.add_argument("--image", help="square binary PGM (P5); synthetic scene if omitted")
            p.add_argument("--side", type=int, help="side of the synthetic scene")
            p.add_argument("--rate", type=int, help="pixel-count reduction, a perfect square")
            p.add_argument("--noise-db", dest="noise_db", type=float)
            p.add_argument("--image-out", dest="image_out", help="write reconstruction as PGM")

    p = sub.add_parser("coherence", help="print mu(F, basis)")
    p.add_argument("--basis", required=True, choices=("spikes", "haar", "dct", "fourier"))
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("sense", help="draw one instance and its measurements as JSON")
    _common(p)
    p = sub.add_parser("recover", help="solve an instance written by 'sense'")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--max-iters", dest="max_iterations", type=int)
    p.add_argument("--tol", dest="primal_tolerance", type=float)
    return parser


_NOT_CONFIG = {"command", "config", "verbose", "image_out"}


def _overrides(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)


def _cmd_sense(args) -> None:
    cfg = load_config(args.config, **_overrides(args))
    n, m, S = cfg.n, cfg.m_grid[0], cfg.s_grid[0]
    scheme, path = parse_omega(cfg.omega)
    omega = make_subsample_set(n, m, scheme, read_indices(path) if path else None)
    wave = gen_waveform(cfg.ensemble, n, derive_seed(cfg.seed, 0))
    inst = gen_sparse_instance(n, S, "unit", derive_seed(cfg.seed, 1), cfg.basis)
    op = SensingOperator(wave, omega)
    y = op.forward(make_basis(cfg.basis, n).synthesize(inst.densify()))
    doc = {"waveform": wave.to_dict(), "instance": inst.to_dict(),
           "omega": list(omega.indices), "scheme": omega.scheme.value,
           "basis": cfg.basis, "y": y.tolist()}
    text = json.dumps(doc, indent=2) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    _emit(text, cfg.out)


def _cmd_recover(args) -> None:
    doc = json.loads(Path(args.input).read_text())
    wave = Waveform.from_dict(doc["waveform"])
    inst = SparseInstance.from_dict(doc["instance"])
    omega = make_subsample_set(wave.n, len(doc["omega"]), doc.get("scheme", "explicit"),
                               doc["omega"])
    basis = make_basis(doc["basis"], wave.n)
    cfg = SolverConfig().override(max_iterations=args.max_iterations,
                                  primal_tolerance=args.primal_tolerance)
    res = basis_pursuit(np.asarray(doc["y"]), SensingOperator(wave, omega), basis, cfg)
    res.with_truth(inst, cfg.exact_tol)
    out = {"alpha_hat": res.alpha_hat.tolist(), "iterations": res.iterations,
           "converged": res.converged, "residual_norm": res.residual_norm,
           "support_recovered": res.support_recovered, "signs_recovered": res.signs_recovered,
           "exact": res.exact, "relative_error": res.relative_error}
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    _emit(text, args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "coherence":
            print(repr(coherence(make_basis(args.basis, args.n)).mu))
        elif args.command == "sense":
            _cmd_sense(args)
        elif args.command == "recover":
            _cmd_recover(args)
        else:
            cfg = load_config(args.config, experiment=args.command, **_overrides(args))
            text = run_experiment(cfg, image_out=getattr(args, "image_out", None))
            _emit(text, cfg.out)
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 2
    except (InvalidParameterError, DimensionError, OSError, KeyError) as exc:
        log.error("invalid configuration: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
