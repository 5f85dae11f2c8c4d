"""Experiment orchestration: datasets in, per-seed checkpoints and CSVs out.

Run layout under ``cfg.output_dir``:

    dataset/                  dataset.bin + manifest.json (gen-data)
    <model label>/seed<k>/    metrics.csv + checkpoint.bin (train)

Seeds run sequentially by default. With ``parallel=True`` each seed runs in
its own process; the MISAC_THREADS environment variable caps the pool size
(default 1, which falls back to the sequential path). No command mutates its
inputs: training reads the dataset and writes only into its own run dir.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

from ..chansim import Dataset, DatasetFormatError, generate_dataset, read_dataset, write_dataset
from ..moefusion import Checkpoint, load_checkpoint
from ..tasks import (EvalReport, TrainResult, evaluate, evaluate_gating_adaptivity,
                     run_training, write_metrics_csv)
from .config import (ExperimentConfig, build_model, effective_task,
                     experiment_hash, parameter_count, scenario_hash_hex)


def dataset_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir) / "dataset"


def seed_run_dir(cfg: ExperimentConfig, seed: int) -> Path:
    return Path(cfg.output_dir) / cfg.model.label / f"seed{seed}"


def gen_data(cfg: ExperimentConfig, out_dir: str | Path | None = None):
    """Generate and persist the scenario's dataset; returns (paths, dataset)."""
    ds = generate_dataset(cfg.scenario)
    paths = write_dataset(ds, Path(out_dir) if out_dir else dataset_dir(cfg))
    return paths, ds


def load_matching_dataset(cfg: ExperimentConfig,
                          data_dir: str | Path | None = None) -> Dataset:
    """Read the dataset and refuse to proceed on a scenario hash mismatch."""
    ds = read_dataset(Path(data_dir) if data_dir else dataset_dir(cfg))
    want = scenario_hash_hex(cfg)
    if ds.manifest.config_hash_hex != want:
        raise DatasetFormatError(
            f"dataset hash {ds.manifest.config_hash_hex[:12]}... does not match "
            f"the configured scenario {want[:12]}...; regenerate with gen-data")
    return ds


def train_seed(cfg: ExperimentConfig, dataset: Dataset, seed: int, *,
               resume: bool = False,
               stop_after_epoch: int | None = None) -> TrainResult:
    """Train one seed end to end and persist metrics.csv + checkpoint.bin."""
    run_dir = seed_run_dir(cfg, seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = run_dir / "checkpoint.bin"
    exp_hash = experiment_hash(cfg)

    resume_ckpt: Checkpoint | None = None
    if resume and ckpt_path.exists():
        resume_ckpt = load_checkpoint(ckpt_path)
        if resume_ckpt.extra.get("config_hash") != exp_hash:
            raise DatasetFormatError(
                f"{ckpt_path} belongs to a different experiment config")

    model = build_model(cfg, seed)
    result = run_training(
        dataset, effective_task(cfg), model, replace(cfg.train, seed=seed),
        model_kind=cfg.model.label, checkpoint_path=ckpt_path,
        config_hash=exp_hash,
        extra_header={"experiment": cfg.to_dict(), "seed": seed},
        stop_after_epoch=stop_after_epoch, resume=resume_ckpt)
    write_metrics_csv(run_dir / "metrics.csv", result.metrics, config_hash=exp_hash)
    return result


def _train_seed_worker(cfg_dict: dict, data_dir: str, seed: int,
                       resume: bool) -> tuple[int, dict]:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    ds = load_matching_dataset(cfg, data_dir)
    result = train_seed(cfg, ds, seed, resume=resume)
    return seed, result.metrics.final.to_dict()


def run_experiment(cfg: ExperimentConfig, *, data_dir: str | Path | None = None,
                   resume: bool = False, parallel: bool = False,
                   log=None) -> dict[int, dict]:
    """Run every configured seed; returns {seed: final metrics row dict}."""
    workers = int(os.environ.get("MISAC_THREADS", "1")) if parallel else 1
    workers = max(1, min(workers, len(cfg.seeds)))
    say = log if log is not None else (lambda _msg: None)

    finals: dict[int, dict] = {}
    if workers == 1:
        dataset = load_matching_dataset(cfg, data_dir)
        for seed in cfg.seeds:
            result = train_seed(cfg, dataset, seed, resume=resume)
            finals[seed] = result.metrics.final.to_dict()
            row = result.metrics.final
            say(f"seed {seed}: {row.metric_name}={row.metric_value:.6g} "
                f"after epoch {row.epoch}")
        return finals

    from concurrent.futures import ProcessPoolExecutor
    load_matching_dataset(cfg, data_dir)  # fail fast before forking
    args = str(Path(data_dir) if data_dir else dataset_dir(cfg))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_train_seed_worker, cfg.to_dict(), args, s, resume)
                   for s in cfg.seeds]
        for fut in futures:
            seed, final = fut.result()
            finals[seed] = final
            say(f"seed {seed}: {final['metric_name']}="
                f"{final['metric_value']:.6g} after epoch {final['epoch']}")
    return finals


@dataclass
class EvalSummary:
    """Everything `eval` reports for one trained checkpoint."""

    config: ExperimentConfig
    seed: int
    report: EvalReport
    adaptivity: dict[str, dict]
    checkpoint: Checkpoint
    matches_final_row: bool


def eval_checkpoint(ckpt_path: str | Path,
                    data_dir: str | Path) -> EvalSummary:
    """Re-evaluate a trained checkpoint on its dataset's test split."""
    ckpt = load_checkpoint(ckpt_path)
    exp = ckpt.extra.get("experiment")
    if exp is None or "seed" not in ckpt.extra:
        raise DatasetFormatError(
            f"{ckpt_path} lacks an embedded experiment config; it was not "
            f"written by the training runner")
    cfg = ExperimentConfig.from_dict(exp)
    if ckpt.extra.get("config_hash") != experiment_hash(cfg):
        raise DatasetFormatError(f"{ckpt_path}: embedded config hash mismatch")
    seed = int(ckpt.extra["seed"])
    ds = load_matching_dataset(cfg, data_dir)

    model = build_model(cfg, seed)
    if model.parameter_names() != ckpt.param_names:
        raise DatasetFormatError(f"{ckpt_path}: parameter names do not match "
                                 f"the configured architecture")
    for p, arr in zip(model.parameters(), ckpt.params):
        p.data[...] = arr

    task = effective_task(cfg)
    report = evaluate(model, ds, task, ds.test_indices)
    adaptivity = evaluate_gating_adaptivity(model, ds, task)

    last = ckpt.metric_rows[-1] if ckpt.metric_rows else None
    matches = bool(last is not None
                   and last["metric_name"] == report.metric_name
                   and last["metric_value"] == report.metric_value
                   and last["gate_mass"] == report.gate_mass)
    return EvalSummary(config=cfg, seed=seed, report=report,
                       adaptivity=adaptivity, checkpoint=ckpt,
                       matches_final_row=matches)


def dry_run_report(cfg: ExperimentConfig) -> str:
    model = build_model(cfg, cfg.seeds[0])
    n = parameter_count(model)
    return (f"config ok: model={cfg.model.label} task={cfg.task.kind} "
            f"seeds={list(cfg.seeds)}\nparameter count: {n}")
