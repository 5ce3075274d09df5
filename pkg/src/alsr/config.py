"""Run configuration: a flat TOML file with one table per subsystem.

Grammar (every key optional, defaults listed by ``alsr train --help``)::

    seed = 0
    sigma_data = 0.5

    [data]       kind, n_train, dim, sigma_data, centers, component_std, noise_std, cells, scale
    [sampler]    sampler = "lognormal" | "loguniform", p_mean, p_std, sigma_min, sigma_max
    [weight]     alpha, kernel = "rational" | "exponential", center_mode = "batch_mean" | "fixed",
                 center_value, center_ema, normalize_batch_weights
    [model]      hidden, n_frequencies, freq_min, freq_max, final_scale
    [trainer]    steps, batch_size, learning_rate, beta1, beta2, eps, record_weighted
    [telemetry]  lambda_min, lambda_max, n_bins, snapshot_fractions
    [eval]       every, n_generated, n_reference, n_steps, sigma_min, sigma_max, rho,
                 n_projections, ed_max_points
    [checkpoint] format = "json" | "npz"
    [ablate]     alphas, kernels, seeds

Unknown tables or keys are rejected. Environment variables are never read.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import tomli
import tomli_w

from .datasets import DatasetSpec
from .errors import ConfigError
from .sampling import SigmaSchedule
from .snr import sampler_from_dict
from .telemetry import BinGrid
from .weighting import WeightConfig


@dataclass(frozen=True)
class SamplerSection:
    sampler: str = "lognormal"
    p_mean: float = -1.2
    p_std: float = 1.2
    sigma_min: float = 0.002
    sigma_max: float = 80.0

    def spec(self):
        return sampler_from_dict(dataclasses.asdict(self))


@dataclass(frozen=True)
class ModelSection:
    hidden: tuple = (128, 128, 128)
    n_frequencies: int = 16
    freq_min: float = 0.25
    freq_max: float = 16.0
    final_scale: float = 1e-2


@dataclass(frozen=True)
class TrainerSection:
    steps: int = 6000
    batch_size: int = 128
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    record_weighted: bool = False


@dataclass(frozen=True)
class TelemetrySection:
    lambda_min: float = -12.0
    lambda_max: float = 12.0
    n_bins: int = 32
    snapshot_fractions: tuple = (1 / 6, 1 / 2, 1.0)

    def grid(self):
        return BinGrid(self.lambda_min, self.lambda_max, self.n_bins)


@dataclass(frozen=True)
class EvalSection:
    every: int = 1000  # 0 evaluates only at the end
    n_generated: int = 10_000
    n_reference: int = 10_000
    n_steps: int = 40
    sigma_min: float = 0.002
    sigma_max: float = 80.0
    rho: float = 7.0
    n_projections: int = 128
    ed_max_points: int = 4096

    def schedule(self):
        return SigmaSchedule(sigma_max=self.sigma_max, sigma_min=self.sigma_min, n_steps=self.n_steps, rho=self.rho)


@dataclass(frozen=True)
class CheckpointSection:
    format: str = "json"


@dataclass(frozen=True)
class AblateSection:
    alphas: tuple = (0.01, 0.05, 0.1)
    kernels: tuple = ("rational",)
    seeds: tuple = (0, 1, 2)


SECTIONS = {
    "data": DatasetSpec,
    "sampler": SamplerSection,
    "weight": WeightConfig,
    "model": ModelSection,
    "trainer": TrainerSection,
    "telemetry": TelemetrySection,
    "eval": EvalSection,
    "checkpoint": CheckpointSection,
    "ablate": AblateSection,
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    sigma_data: float = 0.5
    data: DatasetSpec = field(default_factory=DatasetSpec)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    weight: WeightConfig = field(default_factory=WeightConfig)
    model: ModelSection = field(default_factory=ModelSection)
    trainer: TrainerSection = field(default_factory=TrainerSection)
    telemetry: TelemetrySection = field(default_factory=TelemetrySection)
    eval: EvalSection = field(default_factory=EvalSection)
    checkpoint: CheckpointSection = field(default_factory=CheckpointSection)
    ablate: AblateSection = field(default_factory=AblateSection)

    def __post_init__(self):
        validate(self)

    def with_(self, **sections):
        """Copy with whole sections replaced or, given dicts, selectively updated."""
        updates = {}
        for name, val in sections.items():
            if isinstance(val, dict):
                val = replace(getattr(self, name), **val)
            updates[name] = val
        return replace(self, **updates)


def _positive(name, v):
    if not v > 0:
        raise ConfigError(f"{name} must be positive, got {v!r}")


def validate(cfg: RunConfig):
    _positive("sigma_data", cfg.sigma_data)
    t = cfg.trainer
    if t.steps < 0:
        raise ConfigError("trainer.steps must be nonnegative")
    _positive("trainer.batch_size", t.batch_size)
    if t.learning_rate < 0:
        raise ConfigError("trainer.learning_rate must be nonnegative")
    if not (0 <= t.beta1 < 1 and 0 <= t.beta2 < 1):
        raise ConfigError("adam betas must lie in [0, 1)")
    _positive("trainer.eps", t.eps)
    for f in cfg.telemetry.snapshot_fractions:
        if not (0 < f <= 1):
            raise ConfigError(f"snapshot fractions must lie in (0, 1], got {f}")
    cfg.telemetry.grid()
    cfg.sampler.spec()
    cfg.eval.schedule()
    if cfg.eval.every < 0:
        raise ConfigError("eval.every must be nonnegative")
    _positive("eval.n_generated", cfg.eval.n_generated)
    _positive("eval.n_reference", cfg.eval.n_reference)
    _positive("eval.n_projections", cfg.eval.n_projections)
    if cfg.checkpoint.format not in ("json", "npz"):
        raise ConfigError("checkpoint.format must be 'json' or 'npz'")
    if cfg.data.dim < 1:
        raise ConfigError("data.dim must be positive")


def _coerce(cls, table: dict, where: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(table) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {sorted(unknown)}")
    out = {}
    for k, v in table.items():
        default = known[k].default
        if isinstance(default, tuple):
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        elif isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"[{where}] {k} must be a boolean")
        elif isinstance(default, int) and not isinstance(default, bool):
            if isinstance(v, float) and v.is_integer():
                v = int(v)
            if not isinstance(v, int):
                raise ConfigError(f"[{where}] {k} must be an integer")
        elif isinstance(default, float):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"[{where}] {k} must be a number")
            v = float(v)
        elif isinstance(default, str) and not isinstance(v, str):
            raise ConfigError(f"[{where}] {k} must be a string")
        out[k] = v
    try:
        return cls(**out)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{where}] {e}") from e


def from_dict(doc: dict) -> RunConfig:
    top = {}
    sections = {}
    for k, v in doc.items():
        if k in SECTIONS:
            if not isinstance(v, dict):
                raise ConfigError(f"[{k}] must be a table")
            sections[k] = _coerce(SECTIONS[k], v, k)
        elif k in ("seed", "sigma_data"):
            top[k] = v
        else:
            raise ConfigError(f"unknown top-level key {k!r}")
    if "seed" in top and not isinstance(top["seed"], int):
        raise ConfigError("seed must be an integer")
    if "sigma_data" in top:
        top["sigma_data"] = float(top["sigma_data"])
    try:
        return RunConfig(**top, **sections)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def load_config(path) -> RunConfig:
    try:
        doc = tomli.loads(Path(path).read_text())
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return from_dict(doc)


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def to_dict(cfg: RunConfig) -> dict:
    doc = {"seed": cfg.seed, "sigma_data": cfg.sigma_data}
    for name in SECTIONS:
        sec = getattr(cfg, name)
        doc[name] = {f.name: _plain(getattr(sec, f.name)) for f in fields(sec)}
    return doc


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def describe_keys() -> str:
    """Every config key with its default, for ``--help`` output."""
    lines = ["seed = 0", "sigma_data = 0.5"]
    defaults = to_dict(RunConfig())
    for name in SECTIONS:
        lines.append(f"[{name}]")
        for k, v in defaults[name].items():
            lines.append(f"  {k} = {v!r}")
    return "\n".join(lines)
