"""Minibatch training loop, per-epoch evaluation, and the metrics CSV.

The loop is strictly sequential and deterministic: the shuffle stream is
seeded from TrainConfig.seed, eval batches are fixed-size, and every
reduction runs in a fixed order. Checkpoints carry parameters, optimizer
moments, the shuffle RNG state, and the metric rows, so an interrupted run
resumes bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import numcore as nc
from ..chansim import Dataset
from ..moefusion import Checkpoint, save_checkpoint
from ..numcore import Adam, Tape, Tensor
from .losses import cross_entropy_loss, mse_loss
from .metrics import (mean_euclidean, mean_squared_error, nmse_db, sum_rate_ratio,
                      topk_accuracy)
from .spec import (CANONICAL_MODALITIES, ConfigurationError, TaskSpec,
                   assemble_input, normalized_targets, raw_targets)

EVAL_BATCH = 256
CSV_HEADER = ("epoch,train_loss,metric_name,metric_value,gate_mass_vision,"
              "gate_mass_radar,gate_mass_lidar,gate_mass_position,gate_mass_rf")
GATE_MASS_COLUMNS = ("vision", "radar", "lidar", "position", "rf_history")


class TrainingError(RuntimeError):
    """Raised when training hits a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    train_fraction: float = 0.7
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError("train_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "batch_size": self.batch_size,
                "learning_rate": self.learning_rate,
                "train_fraction": self.train_fraction,
                "seed": self.seed, "shuffle": self.shuffle}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls().to_dict())
        if unknown:
            raise ConfigurationError(f"unknown TrainConfig keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRow:
    """One metrics row: epoch 0 is the pre-training evaluation."""

    epoch: int
    train_loss: float
    metric_name: str
    metric_value: float
    gate_mass: dict[str, float]
    extras: dict[str, float] = field(default_factory=dict)

    def to_csv_line(self) -> str:
        cells = [str(self.epoch), _fmt(self.train_loss), self.metric_name,
                 _fmt(self.metric_value)]
        cells += [_fmt(self.gate_mass.get(m, 0.0)) for m in GATE_MASS_COLUMNS]
        return ",".join(cells)

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "train_loss": self.train_loss,
                "metric_name": self.metric_name, "metric_value": self.metric_value,
                "gate_mass": dict(self.gate_mass), "extras": dict(self.extras)}

    @classmethod
    def from_dict(cls, d: dict) -> "EpochRow":
        return cls(epoch=d["epoch"], train_loss=d["train_loss"],
                   metric_name=d["metric_name"], metric_value=d["metric_value"],
                   gate_mass=dict(d["gate_mass"]), extras=dict(d.get("extras", {})))


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


@dataclass
class RunMetrics:
    rows: list[EpochRow]

    @property
    def final(self) -> EpochRow:
        return self.rows[-1]

    def to_csv(self, config_hash: str | None = None) -> str:
        lines = []
        if config_hash:
            lines.append(f"# config_hash={config_hash}")
        lines.append(CSV_HEADER)
        lines += [row.to_csv_line() for row in self.rows]
        return "\n".join(lines) + "\n"


def write_metrics_csv(path, metrics: RunMetrics, config_hash: str | None = None) -> Path:
    path = Path(path)
    path.write_text(metrics.to_csv(config_hash))
    return path


def read_metrics_csv(path) -> tuple[list[dict], str | None]:
    """Rows as dicts (CSV columns only) plus the embedded config hash."""
    lines = Path(path).read_text().splitlines()
    config_hash = None
    if lines and lines[0].startswith("# config_hash="):
        config_hash = lines[0].split("=", 1)[1]
        lines = lines[1:]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigurationError(f"{path}: unexpected metrics CSV header")
    names = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(names):
            raise ConfigurationError(f"{path}: malformed row {line!r}")
        row = dict(zip(names, cells))
        row["epoch"] = int(row["epoch"])
        for key in names[1:]:
            if key != "metric_name":
                row[key] = float(row[key])
        rows.append(row)
    return rows, config_hash


def batch_loss(model, task: TaskSpec, inputs: list[np.ndarray], targets,
               forced_mask=None):
    """Forward pass and loss on one batch; returns (loss, decision)."""
    out, decision = model.forward(inputs, forced_mask=forced_mask)
    if task.loss_name == "cross_entropy":
        return cross_entropy_loss(out, targets), decision
    return mse_loss(out, Tensor(np.asarray(targets))), decision


@dataclass
class EvalReport:
    metric_name: str
    metric_value: float
    mean_loss: float
    gate_mass: dict[str, float]
    extras: dict[str, float]
    expert_eval_counts: np.ndarray  # per expert, summed over the eval set


def evaluate(model, dataset: Dataset, task: TaskSpec,
             indices: np.ndarray) -> EvalReport:
    """Loss, task metric, and mean applied gate mass over the given slots."""
    inputs = assemble_input(dataset, task, indices)
    targets_n = normalized_targets(dataset, task)[indices]
    targets_r = raw_targets(dataset, task)[indices]
    n = indices.size
    modality_names = [m for m, _ in model.cfg.modalities]

    preds = []
    loss_sum = 0.0
    mass_sum = np.zeros(len(modality_names))
    eval_counts = np.zeros(model.cfg.num_experts)
    for start in range(0, n, EVAL_BATCH):
        sl = slice(start, min(start + EVAL_BATCH, n))
        batch = [b[sl] for b in inputs]
        out, decision = model.forward(batch)
        if task.loss_name == "cross_entropy":
            loss = cross_entropy_loss(out, targets_n[sl])
        else:
            loss = mse_loss(out, Tensor(np.asarray(targets_n[sl])))
        preds.append(out.data.copy())
        loss_sum += float(loss.data) * (sl.stop - sl.start)
        applied = decision.renorm_weights
        per_mod = applied.reshape(applied.shape[0], len(modality_names), -1).sum(axis=2)
        mass_sum += per_mod.sum(axis=0)
        eval_counts += decision.mask.sum(axis=0)
    preds = np.concatenate(preds, axis=0)
    mean_loss = loss_sum / n
    gate_mass = {m: float(v / n) for m, v in zip(modality_names, mass_sum)}

    cfg = dataset.config
    extras = {}
    if task.kind == "beam_prediction":
        metric = topk_accuracy(preds, targets_r, k=1)
        predicted = np.argmax(preds, axis=1)
        extras["sum_rate_ratio"] = sum_rate_ratio(
            dataset.channels[indices], predicted, cfg.codebook_beams,
            cfg.noise_power_w, cfg.downlink_power_w)
    else:
        mean, std = dataset.manifest.target_normalizer(task.target_name)
        preds_raw = preds * std + mean
        if task.kind == "trajectory_tracking":
            metric = mean_euclidean(preds_raw, targets_r)
            per_slot_mse = mean_squared_error(preds_raw, targets_r)
            extras["mse_m2"] = per_slot_mse
            # Cumulative squared error over a length-(L+1) window; per-slot
            # errors are identically distributed so the expectation is the
            # per-slot MSE times the window length.
            extras["window_mse_m2"] = per_slot_mse * (task.window + 1)
        else:
            metric = nmse_db(preds_raw, targets_r)
    extras["expert_evals_per_sample"] = float(eval_counts.sum() / n)
    return EvalReport(metric_name=task.metric_name, metric_value=float(metric),
                      mean_loss=mean_loss, gate_mass=gate_mass, extras=extras,
                      expert_eval_counts=eval_counts)


@dataclass
class TrainResult:
    metrics: RunMetrics
    checkpoint: Checkpoint
    checkpoint_path: Path | None


def _param_norm_snapshot(model) -> str:
    parts = [f"{name}={float(np.linalg.norm(p.data)):.6g}"
             for name, p in zip(model.parameter_names(), model.parameters())]
    return " ".join(parts)


def run_training(dataset: Dataset, task: TaskSpec, model, cfg: TrainConfig,
                 *, model_kind: str = "moe", checkpoint_path=None,
                 config_hash: str | None = None, extra_header: dict | None = None,
                 stop_after_epoch: int | None = None,
                 resume: Checkpoint | None = None) -> TrainResult:
    """Train for cfg.epochs epochs of minibatch Adam; evaluate every epoch.

    Epoch 0 is the pre-training evaluation row. The train/test split comes
    from the dataset manifest; cfg.train_fraction must agree with it so two
    runs can never see different splits by accident.
    """
    manifest = dataset.manifest
    if abs(cfg.train_fraction - manifest.split_fraction) > 1e-12:
        raise ConfigurationError(
            f"train_fraction {cfg.train_fraction} does not match the dataset "
            f"split {manifest.split_fraction}")
    train_idx = dataset.train_indices
    test_idx = dataset.test_indices

    train_inputs = assemble_input(dataset, task, train_idx)
    train_targets = normalized_targets(dataset, task)[train_idx]
    n_train = train_idx.size

    opt = Adam(model.parameters(), lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    rows: list[EpochRow] = []
    start_epoch = 0

    if resume is not None:
        _load_model_state(model, opt, resume)
        rng.bit_generator.state = resume.rng_state
        rows = [EpochRow.from_dict(d) for d in resume.metric_rows]
        start_epoch = resume.epoch

    if start_epoch == 0:
        report = evaluate(model, dataset, task, test_idx)
        train_report = evaluate(model, dataset, task, train_idx)
        rows.append(EpochRow(epoch=0, train_loss=train_report.mean_loss,
                             metric_name=report.metric_name,
                             metric_value=report.metric_value,
                             gate_mass=report.gate_mass, extras=report.extras))

    last_epoch = cfg.epochs if stop_after_epoch is None \
        else min(cfg.epochs, stop_after_epoch)
    ckpt = None
    for epoch in range(start_epoch + 1, last_epoch + 1):
        order = rng.permutation(n_train) if cfg.shuffle else np.arange(n_train)
        loss_sum = 0.0
        for b, start in enumerate(range(0, n_train, cfg.batch_size)):
            take = order[start:start + cfg.batch_size]
            batch = [x[take] for x in train_inputs]
            model.zero_grad()
            with Tape() as tape:
                loss, _ = batch_loss(model, task, batch, train_targets[take])
            if not np.isfinite(loss.data):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} batch {b}; "
                    f"parameter norms: {_param_norm_snapshot(model)}")
            tape.backward(loss)
            opt.step()
            loss_sum += float(loss.data) * take.size

        report = evaluate(model, dataset, task, test_idx)
        rows.append(EpochRow(epoch=epoch, train_loss=loss_sum / n_train,
                             metric_name=report.metric_name,
                             metric_value=report.metric_value,
                             gate_mass=report.gate_mass, extras=report.extras))
        ckpt = _make_checkpoint(model, opt, rng, rows, epoch, model_kind,
                                config_hash, extra_header)
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, ckpt)

    if ckpt is None:  # zero training epochs: persist the initial state
        ckpt = _make_checkpoint(model, opt, rng, rows, start_epoch, model_kind,
                                config_hash, extra_header)
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, ckpt)
    path = Path(checkpoint_path) if checkpoint_path is not None else None
    return TrainResult(metrics=RunMetrics(rows), checkpoint=ckpt, checkpoint_path=path)


def _make_checkpoint(model, opt, rng, rows, epoch, model_kind, config_hash,
                     extra_header=None):
    extra = dict(extra_header or {})
    if config_hash:
        extra["config_hash"] = config_hash
    return Checkpoint(
        model_kind=model_kind, epoch=epoch,
        param_names=model.parameter_names(),
        params=[p.data.copy() for p in model.parameters()],
        adam_first=[m.copy() for m in opt.first_moment],
        adam_second=[v.copy() for v in opt.second_moment],
        adam_scalars={"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2,
                      "eps": opt.eps, "step_count": opt.step_count},
        rng_state=rng.bit_generator.state,
        metric_rows=[r.to_dict() for r in rows],
        extra=extra,
    )


def _load_model_state(model, opt: Adam, ckpt: Checkpoint) -> None:
    names = model.parameter_names()
    if ckpt.param_names != names:
        raise ConfigurationError("checkpoint parameters do not match the model")
    for p, arr in zip(model.parameters(), ckpt.params):
        p.data[...] = arr
    opt.load_state(ckpt.adam_first, ckpt.adam_second,
                   int(ckpt.adam_scalars["step_count"]))


def evaluate_gating_adaptivity(model, dataset: Dataset, task: TaskSpec,
                               indices: np.ndarray | None = None) -> dict:
    """Mean applied gate mass per modality, split by the reliability flag.

    Returns {modality: {"clean": float, "corrupted": float | None,
    "corrupted_slots": int}}; corrupted is None when the modality has no
    corrupted slots in the evaluated set.
    """
    if indices is None:
        indices = dataset.test_indices
    indices = np.asarray(indices, dtype=np.intp)
    inputs = assemble_input(dataset, task, indices)
    modality_names = [m for m, _ in model.cfg.modalities]

    masses = []
    for start in range(0, indices.size, EVAL_BATCH):
        sl = slice(start, min(start + EVAL_BATCH, indices.size))
        _, decision = model.forward([b[sl] for b in inputs])
        applied = decision.renorm_weights
        masses.append(applied.reshape(applied.shape[0], len(modality_names), -1)
                      .sum(axis=2))
    masses = np.concatenate(masses, axis=0)

    report = {}
    for mi, m in enumerate(modality_names):
        reliable = dataset.reliability[m][indices].astype(bool)
        clean = float(masses[reliable, mi].mean()) if reliable.any() else None
        corrupted = float(masses[~reliable, mi].mean()) if (~reliable).any() else None
        report[m] = {"clean": clean, "corrupted": corrupted,
                     "corrupted_slots": int((~reliable).sum())}
    return report
