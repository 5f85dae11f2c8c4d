"""Train the same fusion model twice: dense routing, then sparse top-N.

Small scenario, short schedule. Watch the accuracy track closely while the
sparse run touches a third of the experts per sample.
"""

import numpy as np

from misac.chansim import ScenarioConfig, default_corruption, generate_dataset
from misac.moefusion import MoEConfig, MoEModel
from misac.tasks import TaskSpec, TrainConfig, run_training

scenario = ScenarioConfig(num_slots=768, num_antennas=16, codebook_beams=16,
                          corruption=default_corruption(), rng_seed=99)
ds = generate_dataset(scenario)
task = TaskSpec(kind="beam_prediction")
out_dim = task.out_dim(scenario.num_antennas, scenario.codebook_beams)

common = dict(modalities=task.model_input_widths(), out_dim=out_dim,
              experts_per_modality=3, z_dim=16, h_expert=24, h_head=24,
              gate_hidden=32)
train = TrainConfig(epochs=12, batch_size=64, seed=1)

print("dense routing: every expert runs for every sample")
dense = MoEModel(MoEConfig(**common), seed=1)
res_d = run_training(ds, task, dense, train)
for row in res_d.metrics.rows[::3]:
    print(f"  epoch {row.epoch:>2}  loss {row.train_loss:.3f}  "
          f"top-1 {row.metric_value:.3f}")

e_total = dense.cfg.num_experts
n_active = 4
print(f"\nsparse routing: top-{n_active} of {e_total} experts per sample")
sparse = MoEModel(MoEConfig(**common, routing="sparse", top_n=n_active), seed=1)
res_s = run_training(ds, task, sparse, train)
for row in res_s.metrics.rows[::3]:
    print(f"  epoch {row.epoch:>2}  loss {row.train_loss:.3f}  "
          f"top-1 {row.metric_value:.3f}  "
          f"evals/sample {row.extras['expert_evals_per_sample']:.0f}")

fd = res_d.metrics.final
fs = res_s.metrics.final
print(f"\nfinal top-1: dense {fd.metric_value:.3f} with "
      f"{fd.extras['expert_evals_per_sample']:.0f} expert evals per sample,")
print(f"             sparse {fs.metric_value:.3f} with "
      f"{fs.extras['expert_evals_per_sample']:.0f}")

mass = sorted(fs.gate_mass.items(), key=lambda kv: -kv[1])
print("\nwhere the sparse gate puts its mass:",
      ", ".join(f"{m} {v:.2f}" for m, v in mass))

# the same model in both modes agrees exactly when N covers the whole pool
full = MoEModel(MoEConfig(**common, routing="sparse", top_n=e_total), seed=1)
for p, q in zip(full.parameters(), dense.parameters()):
    p.data[...] = q.data
rng = np.random.default_rng(0)
feats = [rng.normal(size=(8, w)) for _, w in dense.cfg.modalities]
out_d, _ = dense.forward(feats)
out_f, _ = full.forward(feats)
print(f"\nsparse with N = E_total reproduces dense forward to "
      f"{np.max(np.abs(out_d.data - out_f.data)):.2e}")
