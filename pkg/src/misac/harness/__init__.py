"""Experiment orchestration: configs, CLI, comparison, and the selftest suite."""

from .compare import (ComparisonTable, ModelSummary, compare_runs,
                      epochs_to_threshold, median, run_label)
from .config import (MODEL_KINDS, ExperimentConfig, ModelSpec, build_model,
                     effective_task, experiment_hash, load_experiment,
                     parameter_count, save_experiment, scenario_hash_hex)
from .runner import (EvalSummary, dataset_dir, dry_run_report, eval_checkpoint,
                     gen_data, load_matching_dataset, run_experiment,
                     seed_run_dir, train_seed)
from .selftest import CheckFailure, CheckResult, run_selftest
from .cli import main

__all__ = [
    "MODEL_KINDS", "ExperimentConfig", "ModelSpec", "build_model",
    "effective_task", "experiment_hash", "load_experiment", "parameter_count",
    "save_experiment", "scenario_hash_hex",
    "ComparisonTable", "ModelSummary", "compare_runs", "epochs_to_threshold",
    "median", "run_label",
    "EvalSummary", "dataset_dir", "dry_run_report", "eval_checkpoint",
    "gen_data", "load_matching_dataset", "run_experiment", "seed_run_dir",
    "train_seed",
    "CheckFailure", "CheckResult", "run_selftest",
    "main",
]
