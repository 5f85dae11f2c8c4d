"""Task definitions, losses, metrics, and the training loop."""

from .losses import cross_entropy_loss, mse_loss
from .metrics import (NMSE_FLOOR_DB, mean_euclidean, mean_squared_error, nmse_db,
                      sum_rate_ratio, topk_accuracy)
from .spec import (CANONICAL_MODALITIES, DEFAULT_WINDOW, SENSING_MODALITIES,
                   TASK_KINDS, ConfigurationError, TaskSpec, assemble_input,
                   default_modalities, normalized_targets, raw_targets)
from .training import (CSV_HEADER, EVAL_BATCH, GATE_MASS_COLUMNS, EpochRow,
                       EvalReport, RunMetrics, TrainConfig, TrainingError,
                       TrainResult, batch_loss, evaluate,
                       evaluate_gating_adaptivity, read_metrics_csv, run_training,
                       write_metrics_csv)

__all__ = [
    "CANONICAL_MODALITIES", "CSV_HEADER", "DEFAULT_WINDOW", "EVAL_BATCH",
    "GATE_MASS_COLUMNS", "NMSE_FLOOR_DB", "SENSING_MODALITIES", "TASK_KINDS",
    "ConfigurationError", "EpochRow", "EvalReport", "RunMetrics", "TaskSpec",
    "TrainConfig", "TrainingError", "TrainResult", "assemble_input", "batch_loss",
    "cross_entropy_loss", "default_modalities", "evaluate",
    "evaluate_gating_adaptivity", "mean_euclidean", "mean_squared_error",
    "mse_loss", "nmse_db", "normalized_targets", "raw_targets",
    "read_metrics_csv", "run_training", "sum_rate_ratio", "topk_accuracy",
    "write_metrics_csv",
]
