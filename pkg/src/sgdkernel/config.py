"""Experiment configuration: flat INI sections, strict keys, stable hash.

Every runnable experiment is described by a small key-value file with one
section per concern.  Unknown sections or keys are rejected so that typos
cannot silently change a run.  A short content hash of the fully resolved
config (seed and overrides included) is stamped on every emitted table.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _vectors(text: str) -> list[list[float]]:
    """Semicolon separated vectors of whitespace separated floats."""
    vecs = [_floats(part) for part in text.split(";") if part.strip()]
    if not vecs:
        raise ValueError("expected at least one vector")
    return vecs


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in {"true", "yes", "1", "on"}:
        return True
    if lowered in {"false", "no", "0", "off"}:
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ObjectiveConfig:
    kind: str = "linreg"
    n_samples: int = 100
    dim: int = 2
    label_noise: float = 0.5
    amplitude_lo: float = 0.5
    amplitude_hi: float = 2.0
    frequency_lo: float = 0.7
    frequency_hi: float = 1.3


@dataclass
class SgdSectionConfig:
    algorithm: str = "sgd"
    stepsize: float = 0.05
    batch_size: int = 10
    n_steps: int = 1000
    theta0: list = field(default_factory=lambda: [[2.0, -2.0]])
    seeds: list | None = None
    noise_scale: float = 1.0


@dataclass
class QuantizerConfig:
    precision: int = 2
    target_lo: float = 1.5
    target_hi: float = 8.5


@dataclass
class ProviderConfig:
    kind: str = "empirical"
    order: int | None = None
    smoothing: float = 0.1
    branch_budget: int = 10
    temperature: float = 1.0
    endpoint: str | None = None


@dataclass
class SinkhornSectionConfig:
    epsilon: float | None = None
    tol: float = 1e-6
    max_iters: int = 1000


@dataclass
class ForecastSectionConfig:
    n_steps: int = 2000
    n_points: int = 10
    window: int = 100
    tol_bins: int = 2


@dataclass
class ProbeConfig:
    n_samples_over: int = 1
    dirac_threshold: float = 0.9
    diffuse_threshold: float = 0.5


@dataclass
class ScalingSectionConfig:
    rhos: list = field(default_factory=lambda: [0.1, 0.5, 1.0])
    lengths: list = field(default_factory=lambda: [10, 20, 50, 100, 200, 500, 1000])
    n_trials: int = 200
    order: int = 2
    smoothing: float = 0.1
    mixing_steps: int = 200
    state_lo: float = 2.0
    state_hi: float = 8.0
    min_fit_length: int = 10


EXPERIMENT_KINDS = ("regime-probe", "convex-forecast", "nonconvex-forecast",
                    "scaling-laws")


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description."""

    kind: str = "convex-forecast"
    seed: int = 0
    out_dir: str = "results"
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    sgd: SgdSectionConfig = field(default_factory=SgdSectionConfig)
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    sinkhorn: SinkhornSectionConfig = field(default_factory=SinkhornSectionConfig)
    forecast: ForecastSectionConfig = field(default_factory=ForecastSectionConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    scaling: ScalingSectionConfig = field(default_factory=ScalingSectionConfig)


_PARSERS = {
    int: int,
    float: float,
    str: lambda s: s.strip(),
    bool: _bool,
}

_FIELD_PARSERS = {
    ("sgd", "theta0"): _vectors,
    ("sgd", "seeds"): _ints,
    ("scaling", "rhos"): _floats,
    ("scaling", "lengths"): _ints,
    ("provider", "order"): int,
    ("provider", "endpoint"): lambda s: s.strip(),
    ("sinkhorn", "epsilon"): float,
}

_SECTIONS = {
    "experiment": None,
    "objective": ObjectiveConfig,
    "sgd": SgdSectionConfig,
    "quantizer": QuantizerConfig,
    "provider": ProviderConfig,
    "sinkhorn": SinkhornSectionConfig,
    "forecast": ForecastSectionConfig,
    "probe": ProbeConfig,
    "scaling": ScalingSectionConfig,
}


def _parse_field(section: str, name: str, ftype, raw: str):
    special = _FIELD_PARSERS.get((section, name))
    if special is not None:
        return special(raw)
    parser = _PARSERS.get(ftype)
    if parser is None:
        raise ConfigError(f"no parser for {section}.{name}")
    return parser(raw)


def load_config(path, seed: int | None = None,
                provider: str | None = None) -> ExperimentConfig:
    """Load and validate an INI config file.

    ``seed`` and ``provider`` override ``[experiment] seed`` and
    ``[provider] kind``; the returned object already reflects them.
    """
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if section == "experiment":
            for key, raw in parser.items(section):
                if key == "seed":
                    try:
                        cfg.seed = int(raw)
                    except ValueError as exc:
                        raise ConfigError(f"experiment.seed: {exc}") from exc
                elif key == "kind":
                    cfg.kind = raw.strip()
                elif key == "out_dir":
                    cfg.out_dir = raw.strip()
                else:
                    raise ConfigError(f"unknown key {key!r} in [experiment]")
            continue
        target = getattr(cfg, section)
        fields = {f.name: f.type for f in dataclasses.fields(target)}
        for key, raw in parser.items(section):
            if key not in fields:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            base = type(getattr(target, key)) if getattr(target, key) is not None else None
            ftype = base if base in _PARSERS else None
            try:
                value = _parse_field(section, key, ftype, raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{section}.{key}: {exc}") from exc
            setattr(target, key, value)
    if seed is not None:
        cfg.seed = int(seed)
    if provider is not None:
        cfg.provider.kind = provider
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"experiment.kind must be one of {', '.join(EXPERIMENT_KINDS)}, got {cfg.kind!r}")
    if cfg.objective.kind not in {"linreg", "sine"}:
        raise ConfigError(f"objective.kind must be linreg or sine, got {cfg.objective.kind!r}")
    if cfg.sgd.algorithm not in {"sgd", "gld"}:
        raise ConfigError(f"sgd.algorithm must be sgd or gld, got {cfg.sgd.algorithm!r}")
    if cfg.provider.kind not in {"empirical", "oracle", "remote"}:
        raise ConfigError(
            f"provider.kind must be empirical, oracle or remote, got {cfg.provider.kind!r}")
    if cfg.quantizer.precision < 1:
        raise ConfigError("quantizer.precision must be positive")
    dims = {len(v) for v in cfg.sgd.theta0}
    if len(dims) != 1:
        raise ConfigError("all theta0 vectors must share one dimension")
    if cfg.sgd.seeds is not None and len(cfg.sgd.seeds) != len(cfg.sgd.theta0):
        raise ConfigError("sgd.seeds must list one seed per theta0 vector")


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable digest of the fully resolved config."""
    payload = json.dumps(dataclasses.asdict(cfg), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]
