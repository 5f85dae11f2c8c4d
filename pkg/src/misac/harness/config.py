"""Experiment configuration: one JSON file describing data, model, and training.

A config file holds five sections (plus seeds and an output directory):

    {"scenario": {...}, "task": {...}, "model": {...}, "train": {...},
     "seeds": [0, 1], "output_dir": "runs/demo"}

Every section parser rejects unknown keys so a typo fails loudly instead of
silently falling back to a default. ``to_dict`` materializes all defaults,
and the sha256 of the key-sorted JSON of that dict is the config hash that
every artifact embeds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..baselines import concat_fusion, static_weighted, unimodal
from ..chansim import ScenarioConfig, canonical_json, config_hash
from ..moefusion import MoEConfig, MoEModel
from ..tasks import ConfigurationError, TaskSpec, TrainConfig

MODEL_KINDS = ("moe_dense", "moe_sparse", "concat", "static_weighted", "unimodal")


@dataclass(frozen=True)
class ModelSpec:
    """Which architecture to build, and how wide."""

    kind: str
    z_dim: int = 32
    h_expert: int = 64
    h_head: int = 64
    gate_hidden: int = 128
    experts_per_modality: int = 3
    top_n: int | None = None
    modality: str | None = None
    static_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        if (self.top_n is not None) != (self.kind == "moe_sparse"):
            raise ConfigurationError("top_n is required for moe_sparse and "
                                     "meaningless elsewhere")
        if (self.modality is not None) != (self.kind == "unimodal"):
            raise ConfigurationError("modality is required for unimodal and "
                                     "meaningless elsewhere")
        if self.static_weights is not None and self.kind != "static_weighted":
            raise ConfigurationError("static_weights only apply to static_weighted")
        if min(self.z_dim, self.h_expert, self.h_head, self.gate_hidden,
               self.experts_per_modality) < 1:
            raise ConfigurationError("model widths must be positive")

    @property
    def label(self) -> str:
        """Directory-safe run label, e.g. moe_sparse5 or unimodal_radar."""
        if self.kind == "moe_sparse":
            return f"moe_sparse{self.top_n}"
        if self.kind == "unimodal":
            return f"unimodal_{self.modality}"
        return self.kind

    def to_dict(self) -> dict:
        return {"kind": self.kind, "z_dim": self.z_dim,
                "h_expert": self.h_expert, "h_head": self.h_head,
                "gate_hidden": self.gate_hidden,
                "experts_per_modality": self.experts_per_modality,
                "top_n": self.top_n, "modality": self.modality,
                "static_weights": list(self.static_weights)
                if self.static_weights is not None else None}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown model config keys {sorted(unknown)}")
        d = dict(d)
        if d.get("static_weights") is not None:
            d["static_weights"] = tuple(float(w) for w in d["static_weights"])
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs: data, task, model, training, seeds."""

    scenario: ScenarioConfig
    task: TaskSpec
    model: ModelSpec
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs"

    def __post_init__(self):
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds or len(set(seeds)) != len(seeds):
            raise ConfigurationError("seeds must be a nonempty list of "
                                     "distinct integers")
        object.__setattr__(self, "seeds", seeds)
        if abs(self.train.train_fraction - self.scenario.split_fraction) > 1e-12:
            raise ConfigurationError(
                "train.train_fraction must equal scenario.split_fraction")
        if self.model.kind == "unimodal":
            names = [m for m, _ in self.task.model_input_widths()]
            if self.model.modality not in names:
                raise ConfigurationError(
                    f"unimodal modality {self.model.modality!r} is not among "
                    f"the task inputs {names}")

    def to_dict(self) -> dict:
        return {"scenario": self.scenario.to_dict(), "task": self.task.to_dict(),
                "model": self.model.to_dict(), "train": self.train.to_dict(),
                "seeds": list(self.seeds), "output_dir": self.output_dir}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - {"scenario", "task", "model", "train", "seeds",
                            "output_dir"}
        if unknown:
            raise ConfigurationError(f"unknown experiment config keys "
                                     f"{sorted(unknown)}")
        for section in ("scenario", "task", "model"):
            if section not in d:
                raise ConfigurationError(f"missing config section {section!r}")
        return cls(scenario=ScenarioConfig.from_dict(d["scenario"]),
                   task=TaskSpec.from_dict(d["task"]),
                   model=ModelSpec.from_dict(d["model"]),
                   train=TrainConfig.from_dict(d.get("train", {})),
                   seeds=tuple(d.get("seeds", (0,))),
                   output_dir=str(d.get("output_dir", "runs")))


def experiment_hash(cfg: ExperimentConfig) -> str:
    """Hex digest identifying the full experiment config."""
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).hexdigest()


def scenario_hash_hex(cfg: ExperimentConfig) -> str:
    return config_hash(cfg.scenario).hex()


def load_experiment(path: str | Path) -> ExperimentConfig:
    """Parse a JSON experiment file; unknown keys and bad JSON are errors."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a JSON object at top level")
    return ExperimentConfig.from_dict(raw)


def save_experiment(cfg: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def effective_task(cfg: ExperimentConfig) -> TaskSpec:
    """The task actually fed to training: unimodal models see one input."""
    if cfg.model.kind != "unimodal":
        return cfg.task
    return TaskSpec(kind=cfg.task.kind,
                    input_modalities=(cfg.model.modality,),
                    window=cfg.task.window)


def build_model(cfg: ExperimentConfig, seed: int):
    """Instantiate the configured model with the given init seed."""
    task = effective_task(cfg)
    widths = task.model_input_widths()
    out_dim = cfg.task.out_dim(cfg.scenario.num_antennas,
                               cfg.scenario.codebook_beams)
    m = cfg.model
    if m.kind in ("moe_dense", "moe_sparse"):
        mcfg = MoEConfig(modalities=widths, out_dim=out_dim,
                         experts_per_modality=m.experts_per_modality,
                         z_dim=m.z_dim, h_expert=m.h_expert, h_head=m.h_head,
                         gate_hidden=m.gate_hidden,
                         routing="dense" if m.kind == "moe_dense" else "sparse",
                         top_n=m.top_n if m.top_n is not None else 1)
        return MoEModel(mcfg, seed=seed)
    sizes = {"z_dim": m.z_dim, "h_expert": m.h_expert, "h_head": m.h_head}
    if m.kind == "concat":
        return concat_fusion(widths, out_dim, seed=seed, **sizes)
    if m.kind == "static_weighted":
        return static_weighted(widths, out_dim, weights=m.static_weights,
                               seed=seed, **sizes)
    name, width = widths[0]
    return unimodal(name, width, out_dim, seed=seed, **sizes)


def parameter_count(model) -> int:
    return int(sum(p.data.size for p in model.parameters()))
