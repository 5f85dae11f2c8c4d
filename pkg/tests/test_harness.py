"""Harness: config plumbing, CLI exit codes, artifacts, and comparison."""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from misac.harness import (ExperimentConfig, ModelSpec, build_model, compare_runs,
                           effective_task, eval_checkpoint, experiment_hash,
                           load_experiment, median, parameter_count,
                           run_experiment, seed_run_dir, train_seed)
from misac.harness.cli import main
from misac.chansim import read_dataset
from misac.moefusion import load_checkpoint
from misac.tasks import ConfigurationError, read_metrics_csv


def exp_dict(tmp, **overrides):
    d = {
        "scenario": {"num_slots": 160, "num_antennas": 8, "codebook_beams": 8,
                     "rng_seed": 11, "corruption": {}},
        "task": {"kind": "beam_prediction"},
        "model": {"kind": "moe_dense", "z_dim": 8, "h_expert": 12,
                  "h_head": 12, "gate_hidden": 16, "experts_per_modality": 2},
        "train": {"epochs": 2, "batch_size": 32, "seed": 0},
        "seeds": [0, 1],
        "output_dir": str(Path(tmp) / "runs"),
    }
    d.update(overrides)
    return d


def write_config(tmp, name="exp.json", **overrides) -> Path:
    p = Path(tmp) / name
    p.write_text(json.dumps(exp_dict(tmp, **overrides)))
    return p


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One generated dataset plus a two-seed trained experiment."""
    tmp = tmp_path_factory.mktemp("hrun")
    cfg_path = write_config(tmp)
    assert main(["gen-data", str(cfg_path)]) == 0
    assert main(["train", str(cfg_path)]) == 0
    return tmp, cfg_path, load_experiment(cfg_path)


def test_gen_data_is_reproducible_and_fast(tmp_path):
    cfg_path = write_config(tmp_path, scenario={
        "num_slots": 100, "num_antennas": 8, "codebook_beams": 8,
        "rng_seed": 3, "corruption": {}})
    cfg = load_experiment(cfg_path)
    start = time.perf_counter()
    assert main(["gen-data", str(cfg_path), "--out", str(tmp_path / "d1")]) == 0
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    assert main(["gen-data", str(cfg_path), "--out", str(tmp_path / "d2")]) == 0
    same_hash = experiment_hash(cfg) == experiment_hash(load_experiment(cfg_path))
    assert same_hash
    assert (tmp_path / "d1" / "dataset.bin").read_bytes() == \
        (tmp_path / "d2" / "dataset.bin").read_bytes()
    assert (tmp_path / "d1" / "manifest.json").read_text() == \
        (tmp_path / "d2" / "manifest.json").read_text()


def test_unknown_config_key_exits_2_and_names_it(tmp_path, capsys):
    d = exp_dict(tmp_path)
    d["lerning_rate"] = 1e-3
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    assert main(["gen-data", str(p)]) == 2
    assert "lerning_rate" in capsys.readouterr().err

    d = exp_dict(tmp_path)
    d["model"]["zdim"] = 8
    del d["model"]["z_dim"]
    p.write_text(json.dumps(d))
    assert main(["train", str(p), "--dry-run"]) == 2
    assert "zdim" in capsys.readouterr().err


def test_bad_json_and_missing_file(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["train", str(p), "--dry-run"]) == 2
    assert main(["train", str(tmp_path / "absent.json"), "--dry-run"]) == 1


def test_model_spec_validation():
    with pytest.raises(ConfigurationError):
        ModelSpec(kind="moe_dense", top_n=3)
    with pytest.raises(ConfigurationError):
        ModelSpec(kind="moe_sparse")
    with pytest.raises(ConfigurationError):
        ModelSpec(kind="concat", modality="vision")
    with pytest.raises(ConfigurationError):
        ModelSpec(kind="unimodal")
    with pytest.raises(ConfigurationError):
        ModelSpec(kind="concat", static_weights=(0.5, 0.5))
    assert ModelSpec(kind="moe_sparse", top_n=5).label == "moe_sparse5"
    assert ModelSpec(kind="unimodal", modality="radar").label == "unimodal_radar"


def test_dry_run_prints_count_and_trains_nothing(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    assert main(["train", str(cfg_path), "--dry-run"]) == 0
    out = capsys.readouterr().out
    cfg = load_experiment(cfg_path)
    n = parameter_count(build_model(cfg, 0))
    assert f"parameter count: {n}" in out
    assert not (Path(tmp_path) / "runs" / "moe_dense").exists()


def test_train_writes_artifacts_with_config_hash(trained):
    tmp, cfg_path, cfg = trained
    want = experiment_hash(cfg)
    for seed in (0, 1):
        run_dir = seed_run_dir(cfg, seed)
        rows, got = read_metrics_csv(run_dir / "metrics.csv")
        assert got == want
        assert len(rows) == 3  # epoch 0 plus two training epochs
        ckpt = load_checkpoint(run_dir / "checkpoint.bin")
        assert ckpt.extra["config_hash"] == want
        assert ckpt.extra["seed"] == seed
        assert ExperimentConfig.from_dict(ckpt.extra["experiment"]) == cfg
    rows0, _ = read_metrics_csv(seed_run_dir(cfg, 0) / "metrics.csv")
    rows1, _ = read_metrics_csv(seed_run_dir(cfg, 1) / "metrics.csv")
    assert [r["train_loss"] for r in rows0] != [r["train_loss"] for r in rows1]


def test_train_refuses_wrong_dataset(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    assert main(["gen-data", str(cfg_path)]) == 0
    other = write_config(tmp_path, name="other.json", scenario={
        "num_slots": 160, "num_antennas": 8, "codebook_beams": 8,
        "rng_seed": 999, "corruption": {}})
    other_dir = tmp_path / "other_data"
    assert main(["gen-data", str(other), "--out", str(other_dir)]) == 0
    assert main(["train", str(cfg_path), "--data", str(other_dir)]) == 1
    assert "hash" in capsys.readouterr().err


def test_resume_matches_straight_run(trained, tmp_path):
    tmp, cfg_path, cfg = trained
    ds = read_dataset(Path(cfg.output_dir) / "dataset")
    resumed_cfg = ExperimentConfig.from_dict(
        {**cfg.to_dict(), "output_dir": str(tmp_path / "resume_runs")})
    train_seed(resumed_cfg, ds, 0, stop_after_epoch=1)
    train_seed(resumed_cfg, ds, 0, resume=True)
    straight = (seed_run_dir(cfg, 0) / "metrics.csv").read_text()
    replayed = (seed_run_dir(resumed_cfg, 0) / "metrics.csv").read_text()
    # output_dir is part of the hash comment; compare the data rows
    assert straight.splitlines()[1:] == replayed.splitlines()[1:]
    a = (seed_run_dir(cfg, 0) / "checkpoint.bin").read_bytes()
    b = (seed_run_dir(resumed_cfg, 0) / "checkpoint.bin").read_bytes()
    assert a != b  # differing embedded config (output_dir)
    ca, cb = load_checkpoint(seed_run_dir(cfg, 0) / "checkpoint.bin"), \
        load_checkpoint(seed_run_dir(resumed_cfg, 0) / "checkpoint.bin")
    for pa, pb in zip(ca.params, cb.params):
        np.testing.assert_array_equal(pa, pb)
    assert ca.metric_rows == cb.metric_rows
    assert ca.rng_state == cb.rng_state


def test_eval_reproduces_final_row_and_reports(trained, capsys):
    tmp, cfg_path, cfg = trained
    ckpt_path = seed_run_dir(cfg, 0) / "checkpoint.bin"
    data_dir = Path(cfg.output_dir) / "dataset"
    summary = eval_checkpoint(ckpt_path, data_dir)
    assert summary.matches_final_row
    assert "sum_rate_ratio" in summary.report.extras
    assert main(["eval", str(ckpt_path), str(data_dir)]) == 0
    out = capsys.readouterr().out
    assert "final CSV row reproduced: yes" in out
    assert "sum_rate_ratio" in out


def test_eval_histogram_sums_to_n_times_samples(tmp_path):
    cfg_path = write_config(
        tmp_path,
        model={"kind": "moe_sparse", "top_n": 3, "z_dim": 8, "h_expert": 12,
               "h_head": 12, "gate_hidden": 16, "experts_per_modality": 2},
        seeds=[0])
    assert main(["gen-data", str(cfg_path)]) == 0
    assert main(["train", str(cfg_path)]) == 0
    cfg = load_experiment(cfg_path)
    summary = eval_checkpoint(seed_run_dir(cfg, 0) / "checkpoint.bin",
                              Path(cfg.output_dir) / "dataset")
    ds = read_dataset(Path(cfg.output_dir) / "dataset")
    n_test = ds.test_indices.size
    assert summary.report.expert_eval_counts.sum() == 3 * n_test


def test_compare_groups_runs_and_applies_threshold(trained, tmp_path, capsys):
    tmp, cfg_path, cfg = trained
    csvs = [str(seed_run_dir(cfg, s) / "metrics.csv") for s in (0, 1)]
    table = compare_runs(csvs)
    assert len(table.models) == 1
    row = table.models[0]
    assert row.label == "moe_dense" and row.num_runs == 2
    finals = [read_metrics_csv(p)[0][-1]["metric_value"] for p in csvs]
    assert row.median_final == pytest.approx(0.5 * sum(finals))
    assert row.epochs_to_threshold is None  # no threshold given

    # threshold nobody reaches -> n/a in text output
    out_csv = tmp_path / "cmp.csv"
    assert main(["compare", *csvs, "--threshold", "1.01",
                 "--out", str(out_csv)]) == 0
    text = capsys.readouterr().out
    assert "n/a" in text
    assert out_csv.read_text().splitlines()[0] == \
        "model,runs,metric_name,median_final,epochs_to_threshold"

    always = compare_runs(csvs, threshold=0.0)
    assert always.models[0].epochs_to_threshold == 0


def test_compare_median_is_middle_order_statistic():
    assert median([3.0, 1.0, 2.0]) == 2.0
    assert median([4.0, 1.0]) == 2.5


def test_compare_rejects_mixed_metrics(trained, tmp_path):
    tmp, cfg_path, cfg = trained
    beam_csv = seed_run_dir(cfg, 0) / "metrics.csv"
    other = tmp_path / "other" / "seed0" / "metrics.csv"
    other.parent.mkdir(parents=True)
    rows, _ = read_metrics_csv(beam_csv)
    text = beam_csv.read_text().replace("top1_accuracy", "nmse_db")
    other.write_text("\n".join(text.splitlines()[1:]) + "\n")
    with pytest.raises(ConfigurationError, match="mixed metric"):
        compare_runs([beam_csv, other])
    assert main(["compare", str(beam_csv), str(other)]) == 2


def test_unimodal_experiment_runs_with_restricted_task(tmp_path):
    cfg_path = write_config(
        tmp_path,
        model={"kind": "unimodal", "modality": "radar", "z_dim": 8,
               "h_expert": 12, "h_head": 12},
        seeds=[0])
    cfg = load_experiment(cfg_path)
    task = effective_task(cfg)
    assert [m for m, _ in task.model_input_widths()] == ["radar"]
    assert main(["gen-data", str(cfg_path)]) == 0
    assert main(["train", str(cfg_path)]) == 0
    rows, _ = read_metrics_csv(
        seed_run_dir(cfg, 0) / "metrics.csv")
    assert rows[-1]["gate_mass_radar"] == 1.0
    assert rows[-1]["gate_mass_vision"] == 0.0


def test_unimodal_modality_must_be_a_task_input(tmp_path):
    with pytest.raises(ConfigurationError, match="rf_history"):
        ExperimentConfig.from_dict(exp_dict(
            tmp_path,
            model={"kind": "unimodal", "modality": "rf_history"}))


def test_parallel_execution_matches_sequential(trained, tmp_path, monkeypatch):
    tmp, cfg_path, cfg = trained
    par_cfg = ExperimentConfig.from_dict(
        {**cfg.to_dict(), "output_dir": str(tmp_path / "par_runs")})
    monkeypatch.setenv("MISAC_THREADS", "2")
    run_experiment(par_cfg, data_dir=Path(cfg.output_dir) / "dataset",
                   parallel=True)
    for seed in (0, 1):
        a, _ = read_metrics_csv(seed_run_dir(cfg, seed) / "metrics.csv")
        b, _ = read_metrics_csv(seed_run_dir(par_cfg, seed) / "metrics.csv")
        assert a == b


def test_cli_entry_point_via_interpreter(tmp_path):
    cfg_path = write_config(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "misac", "train", str(cfg_path), "--dry-run"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert "parameter count:" in proc.stdout
