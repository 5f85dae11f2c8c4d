"""Does the gate notice when a sensor goes bad? Train, then split the mass.

Trains a dense fusion model on a scene whose vision stream drops out in
episodes, then compares the gate mass each modality receives on clean versus
corrupted test slots.
"""

from misac.chansim import ScenarioConfig, default_corruption, generate_dataset
from misac.moefusion import MoEConfig, MoEModel
from misac.tasks import (TaskSpec, TrainConfig, evaluate_gating_adaptivity,
                         run_training)

scenario = ScenarioConfig(num_slots=1024, num_antennas=16, codebook_beams=16,
                          corruption=default_corruption(), rng_seed=31)
ds = generate_dataset(scenario)
for name in ("vision", "radar", "lidar", "position"):
    bad = int((~ds.reliability[name]).sum())
    print(f"{name:<9} corrupted in {bad:>3} of {len(ds)} slots")

task = TaskSpec(kind="beam_prediction")
model = MoEModel(
    MoEConfig(modalities=task.model_input_widths(),
              out_dim=task.out_dim(16, 16),
              experts_per_modality=3, z_dim=16, h_expert=24, h_head=24,
              gate_hidden=32),
    seed=5)

print("\ntraining 15 epochs ...")
res = run_training(ds, task, model, TrainConfig(epochs=15, batch_size=64, seed=5))
print(f"final top-1 {res.metrics.final.metric_value:.3f}")

report = evaluate_gating_adaptivity(model, ds, task)
print("\ngate mass by modality, clean vs corrupted test slots:")
print(f"{'modality':<10}{'clean':>8}{'corrupted':>11}{'shift':>8}")
for name, row in report.items():
    if row["corrupted"] is None:
        print(f"{name:<10}{row['clean']:>8.3f}{'n/a':>11}{'':>8}")
        continue
    shift = row["corrupted"] - row["clean"]
    print(f"{name:<10}{row['clean']:>8.3f}{row['corrupted']:>11.3f}"
          f"{shift:>+8.3f}")

vis = report["vision"]
if vis["corrupted"] is not None and vis["corrupted"] < vis["clean"]:
    print("\nthe gate pulls mass away from vision exactly when vision "
          "stops being trustworthy")
else:
    print("\nno clear shift at this scale; longer schedules sharpen it")
