"""Run configuration: defaults, YAML loading, and per-run hashing.

Defaults reproduce the reference system: fixed qubits (ej0 20 GHz, ec
0.25 GHz), uniform device-parameter box, 50 training devices x 100 pulses,
the full-batch training schedule, 7 measurement pairs x 20 adapt fluxes,
and 10 held-out devices. Every output artifact embeds the hash of the
resolved configuration.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .adaptation import AdaptConfig
from .dataset import EnsembleSpec
from .errors import ConfigError
from .physics import FrameConfig, QubitConstants
from .surrogate import TrainConfig

RESULTS_ENV_VAR = "HAMLEARN_RESULTS"

# Default seed for held-out device sampling. Chosen so the sampled ensemble
# spans the hybridization band from the deep-dispersive regime into the
# perturbation-theory breakdown regime (see the hybridization selfcheck).
DEFAULT_HELDOUT_SEED = 2612


@dataclass(frozen=True)
class Counts:
    train_devices: int = 50
    pulses_per_device: int = 100
    heldout_devices: int = 10
    eval_points: int = 300
    sweep_points: int = 100
    infidelity_points: int = 50


@dataclass(frozen=True)
class Seeds:
    heldout: int = DEFAULT_HELDOUT_SEED
    train: int = 0
    design: int = 0
    adapt: int = 0
    eval: int = 0


@dataclass(frozen=True)
class DesignConfig:
    n_draws: int = 500
    n_pairs: int = 7
    n_fluxes: int = 20


@dataclass(frozen=True)
class EvalConfig:
    hybridization_phi_c1: float = 1.35
    hybridization_phi_q: float = 0.25
    sweep_phi_q: float = 0.25


@dataclass(frozen=True)
class RunConfig:
    results_dir: str = "results"
    t: float = 1.0
    workers: int = 1
    qubit: QubitConstants = field(default_factory=QubitConstants)
    frame: FrameConfig = field(default_factory=FrameConfig)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    design: DesignConfig = field(default_factory=DesignConfig)
    counts: Counts = field(default_factory=Counts)
    seeds: Seeds = field(default_factory=Seeds)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    adapt_restarts: int = 5
    adapt_max_iterations: int = 100

    def path(self, name: str) -> Path:
        files = {
            "dataset": "dataset.jsonl",
            "checkpoint": "checkpoint.json",
            "selection": "selection.json",
            "adapt": "adapt.json",
            "history": "train_history.csv",
            "table": "table_coefficient_mae.csv",
            "scatter": "fig_coefficient_scatter.csv",
            "infidelity": "fig_excess_infidelity.csv",
            "hybridization": "fig_hybridization.csv",
            "informativeness": "fig_informativeness.csv",
            "greedy": "fig_greedy_selection.csv",
            "sweep": "fig_flux_sweep.csv",
            "swpt_sweep": "fig_swpt_sweep.csv",
            "summary": "summary.json",
        }
        return Path(self.results_dir) / files[name]

    def adapt_config(self) -> AdaptConfig:
        return AdaptConfig.from_spec(
            self.ensemble,
            restarts=self.adapt_restarts,
            max_iterations=self.adapt_max_iterations,
            t=self.t,
            seed=self.seeds.adapt,
        )

    def heldout_spec(self) -> EnsembleSpec:
        return replace(self.ensemble, seed=self.seeds.heldout)

    def to_dict(self) -> dict:
        return {
            "results_dir": self.results_dir,
            "t": self.t,
            "workers": self.workers,
            "qubit": asdict(self.qubit),
            "frame": asdict(self.frame),
            "ensemble": self.ensemble.as_dict(),
            "train": asdict(self.train),
            "design": asdict(self.design),
            "counts": asdict(self.counts),
            "seeds": asdict(self.seeds),
            "evaluation": asdict(self.evaluation),
            "adapt": {
                "restarts": self.adapt_restarts,
                "max_iterations": self.adapt_max_iterations,
            },
        }

    def hash(self) -> str:
        from .persist import config_hash

        return config_hash(self.to_dict())


def _build_section(cls, data: dict, name: str):
    valid = {f.name for f in fields(cls)}
    unknown = set(data) - valid
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section {name!r}: {exc}") from exc


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Resolve a RunConfig from an optional YAML file plus flat overrides.

    Overrides use dotted keys (e.g. ``counts.train_devices``). The default
    results directory honors the HAMLEARN_RESULTS environment variable when
    neither the file nor an override sets it.
    """
    data: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must contain a mapping")

    for key, value in (overrides or {}).items():
        target = data
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value

    known_sections = {
        "qubit": QubitConstants,
        "frame": FrameConfig,
        "train": TrainConfig,
        "design": DesignConfig,
        "counts": Counts,
        "seeds": Seeds,
        "evaluation": EvalConfig,
    }
    kwargs: dict = {}
    for key, value in data.items():
        if key in known_sections:
            kwargs[key] = _build_section(known_sections[key], value, key)
        elif key == "ensemble":
            merged = EnsembleSpec().as_dict()
            unknown = set(value) - set(merged)
            if unknown:
                raise ConfigError(f"unknown keys in section 'ensemble': {sorted(unknown)}")
            merged.update(value)
            try:
                kwargs["ensemble"] = EnsembleSpec.from_dict(merged)
            except ValueError as exc:
                raise ConfigError(f"invalid ensemble bounds: {exc}") from exc
        elif key == "adapt":
            extra = set(value) - {"restarts", "max_iterations"}
            if extra:
                raise ConfigError(f"unknown keys in section 'adapt': {sorted(extra)}")
            if "restarts" in value:
                kwargs["adapt_restarts"] = int(value["restarts"])
            if "max_iterations" in value:
                kwargs["adapt_max_iterations"] = int(value["max_iterations"])
        elif key in ("results_dir", "t", "workers"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown top-level config key {key!r}")

    if "results_dir" not in kwargs:
        kwargs["results_dir"] = os.environ.get(RESULTS_ENV_VAR, "results")
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
