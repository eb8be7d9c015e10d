"""Experiment configuration: flat YAML file plus command-line overrides."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from ..core import InvalidParameterError
from ..recovery import SolverConfig

__all__ = ["Experiment", "ExperimentConfig", "ConfigError", "load_config", "parse_grid",
           "parse_omega", "read_indices"]


class ConfigError(InvalidParameterError):
    pass


class Experiment(str, enum.Enum):
    PHASE_TRANSITION = "phase-transition"
    CONCENTRATION = "concentration"
    CERTIFICATE = "certificate"
    CODED_APERTURE = "coded-aperture"
    BOUNDS = "bounds"


SOLVER_KEYS = tuple(f.name for f in fields(SolverConfig))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment = Experiment.PHASE_TRANSITION
    n: int = 256
    basis: str = "spikes"
    ensemble: str = "gaussian"
    omega: str = "equal"
    m_grid: tuple = (64,)
    s_grid: tuple = (4,)
    trials: int = 100
    seed: int = 0
    magnitude: str = "unit"
    r_grid: tuple = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0)
    variant: str = "fixed_vector"
    delta: float = 0.1
    K: float = 1.0
    contour_level: float = 0.5
    success_level: float = 0.9
    certificate: bool = False
    pt_data: str | None = None
    image: str | None = None
    rate: int = 4
    noise_db: float | None = 30.0
    side: int = 64
    workers: int = 1
    out: str | None = None
    format: str = "csv"
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        object.__setattr__(self, "m_grid", tuple(int(v) for v in parse_grid(self.m_grid)))
        object.__setattr__(self, "s_grid", tuple(int(v) for v in parse_grid(self.s_grid)))
        object.__setattr__(self, "r_grid", tuple(float(v) for v in parse_grid(self.r_grid)))
        if not self.m_grid or not self.s_grid:
            raise ConfigError("m and S grids must be non-empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n < 1 or min(self.m_grid) < 1 or min(self.s_grid) < 1:
            raise ConfigError("n, m and S must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.format!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        unknown = set(self.solver) - set(SOLVER_KEYS)
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        self.solver_config()
        parse_omega(self.omega)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    def echo(self) -> dict:
        """JSON-friendly copy of every setting except the worker count."""
        d = dataclasses.asdict(self)
        d["experiment"] = self.experiment.value
        d.pop("workers")
        for k in ("m_grid", "s_grid", "r_grid"):
            d[k] = list(d[k])
        d["solver"] = dataclasses.asdict(self.solver_config())
        return d


def parse_grid(v) -> list:
    if isinstance(v, str):
        return [x for x in (p.strip() for p in v.split(",")) if x]
    if isinstance(v, (int, float)):
        return [v]
    return list(v)


def parse_omega(spec: str) -> tuple:
    """``"equal"`` or ``"explicit:<file>"`` -> (scheme, path or None)."""
    if spec == "equal":
        return "equal", None
    if spec.startswith("explicit:") and len(spec) > len("explicit:"):
        return "explicit", spec[len("explicit:"):]
    raise ConfigError(f"omega must be 'equal' or 'explicit:<file>', got {spec!r}")


def read_indices(path) -> list:
    text = Path(path).read_text()
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad index file {path}: {exc}") from None


_ALIASES = {"m": "m_grid", "s": "s_grid", "S": "s_grid", "r": "r_grid"}


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Merge a flat YAML mapping with overrides; ``None`` overrides are ignored."""
    values = {}
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a flat key-value mapping")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    values = {_ALIASES.get(k, k): v for k, v in values.items()}
    solver = dict(values.pop("solver", None) or {})
    for k in SOLVER_KEYS:
        if k in values:
            solver[k] = values.pop(k)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(solver=solver, **values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
