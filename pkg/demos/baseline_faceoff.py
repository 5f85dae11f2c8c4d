"""Line up the fusion strategies on one task and print the comparison table.

Uses the experiment harness end to end: config, gen-data, per-seed training,
and the compare summary, exactly as the command line would do it.
"""

import tempfile
from pathlib import Path

from misac.chansim import ScenarioConfig, default_corruption
from misac.harness import (ExperimentConfig, ModelSpec, compare_runs, gen_data,
                           run_experiment, seed_run_dir)
from misac.tasks import TaskSpec, TrainConfig

scenario = ScenarioConfig(num_slots=768, num_antennas=16, codebook_beams=16,
                          corruption=default_corruption(), rng_seed=7)
task = TaskSpec(kind="beam_prediction")
train = TrainConfig(epochs=10, batch_size=64)
seeds = (0, 1, 2)

CONTENDERS = [
    ModelSpec(kind="moe_dense", z_dim=16, h_expert=24, h_head=24,
              gate_hidden=32, experts_per_modality=2),
    ModelSpec(kind="concat", z_dim=16, h_expert=24, h_head=24),
    ModelSpec(kind="static_weighted", z_dim=16, h_expert=24, h_head=24),
    ModelSpec(kind="unimodal", modality="position", z_dim=16, h_expert=24,
              h_head=24),
    ModelSpec(kind="unimodal", modality="radar", z_dim=16, h_expert=24,
              h_head=24),
]

with tempfile.TemporaryDirectory() as tmp:
    csvs = []
    for model in CONTENDERS:
        cfg = ExperimentConfig(scenario=scenario, task=task, model=model,
                               train=train, seeds=seeds, output_dir=tmp)
        if not csvs:
            gen_data(cfg)
            print("dataset ready")
        print(f"training {cfg.model.label} on seeds {list(seeds)} ...")
        run_experiment(cfg)
        csvs += [seed_run_dir(cfg, s) / "metrics.csv" for s in seeds]

    table = compare_runs(csvs, threshold=0.5)
    print()
    print(table.to_text())
    print("threshold column: first epoch with top-1 >= 0.5, median over seeds")
