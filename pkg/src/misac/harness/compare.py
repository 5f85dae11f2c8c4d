"""Cross-run comparison: median final metric and epochs-to-threshold.

Input is a list of metrics CSVs as written by the runner. Runs are grouped
by model label, taken from the ``<label>/seed<k>/metrics.csv`` layout (or the
file stem when the path does not follow it). All files must report the same
metric; mixing, say, top-1 accuracy with NMSE rows is refused.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from ..tasks import ConfigurationError, read_metrics_csv

# metrics where larger is better; everything else improves downward
HIGHER_IS_BETTER = {"top1_accuracy"}


def run_label(path: str | Path) -> str:
    path = Path(path)
    if re.fullmatch(r"seed\d+", path.parent.name) and path.parent.parent.name:
        return path.parent.parent.name
    return path.stem


def median(values: list[float]) -> float:
    """Middle order statistic; even counts average the two middle values."""
    v = sorted(values)
    n = len(v)
    mid = v[(n - 1) // 2] if n % 2 else 0.5 * (v[n // 2 - 1] + v[n // 2])
    return float(mid)


def epochs_to_threshold(rows: list[dict], threshold: float,
                        higher_is_better: bool) -> int | None:
    for row in rows:
        value = row["metric_value"]
        if (value >= threshold) if higher_is_better else (value <= threshold):
            return int(row["epoch"])
    return None


@dataclass
class ModelSummary:
    label: str
    num_runs: int
    metric_name: str
    median_final: float
    epochs_to_threshold: int | None  # median over runs; None if never reached


@dataclass
class ComparisonTable:
    metric_name: str
    threshold: float | None
    models: list[ModelSummary]

    def to_text(self) -> str:
        head = f"{'model':<24}{'runs':>5}  {'median ' + self.metric_name:>24}"
        head += f"  {'epochs to threshold':>20}"
        lines = [head, "-" * len(head)]
        for m in self.models:
            reach = "n/a" if m.epochs_to_threshold is None \
                else str(m.epochs_to_threshold)
            lines.append(f"{m.label:<24}{m.num_runs:>5}  "
                         f"{m.median_final:>24.9g}  {reach:>20}")
        if self.threshold is None:
            lines.append("(no threshold given; epochs-to-threshold is n/a)")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["model,runs,metric_name,median_final,epochs_to_threshold"]
        for m in self.models:
            reach = "n/a" if m.epochs_to_threshold is None \
                else str(m.epochs_to_threshold)
            lines.append(f"{m.label},{m.num_runs},{m.metric_name},"
                         f"{m.median_final:.9g},{reach}")
        return "\n".join(lines) + "\n"


def compare_runs(csv_paths: list[str | Path],
                 threshold: float | None = None) -> ComparisonTable:
    if not csv_paths:
        raise ConfigurationError("compare needs at least one metrics CSV")
    by_label: dict[str, list[list[dict]]] = {}
    metric_name = None
    for path in csv_paths:
        rows, _ = read_metrics_csv(path)
        if not rows:
            raise ConfigurationError(f"{path}: no metric rows")
        name = rows[-1]["metric_name"]
        if metric_name is None:
            metric_name = name
        elif name != metric_name:
            raise ConfigurationError(
                f"mixed metric names: {metric_name} vs {name} in {path}")
        by_label.setdefault(run_label(path), []).append(rows)

    higher = metric_name in HIGHER_IS_BETTER
    models = []
    for label, runs in by_label.items():
        finals = [r[-1]["metric_value"] for r in runs]
        reach = None
        if threshold is not None:
            per_run = [epochs_to_threshold(sorted(r, key=lambda x: x["epoch"]),
                                           threshold, higher) for r in runs]
            if all(e is not None for e in per_run):
                reach = int(round(median([float(e) for e in per_run])))
        models.append(ModelSummary(label=label, num_runs=len(runs),
                                   metric_name=metric_name,
                                   median_final=median(finals),
                                   epochs_to_threshold=reach))
    return ComparisonTable(metric_name=metric_name, threshold=threshold,
                           models=models)
