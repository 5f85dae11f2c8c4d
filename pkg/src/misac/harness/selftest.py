"""Exact property suite behind the `selftest` command.

Seven checks, one line of output each. The first two sweep finite-difference
gradient checks over every differentiable op and over full fusion-model
losses; the rest pin the simplex, routing, channel-algebra, and persistence
guarantees. Every check either returns a detail string or raises
CheckFailure, so the same functions double as acceptance assertions.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .. import numcore as nc
from ..chansim import (PathSet, ScenarioConfig, array_response,
                       default_corruption, dft_codebook, generate_dataset,
                       optimal_beam, sum_rate, synthesize_channel, write_dataset)
from ..moefusion import MoEConfig, MoEModel, load_checkpoint, save_checkpoint
from ..numcore import Tape, Tensor, finite_difference_check
from ..tasks import (TaskSpec, TrainConfig, assemble_input, batch_loss,
                     normalized_targets, run_training)

FD_TOL = 1e-4
GRADCHECK_SEEDS = 20


class CheckFailure(AssertionError):
    """A selftest property does not hold."""


# ---------------------------------------------------------------- check 1a

def _rows(rng, *shape):
    return rng.normal(size=shape)

def _off_kink(rng, *shape):
    x = rng.normal(size=shape)
    return np.sign(x) * (np.abs(x) + 0.1)

def _away_from_zero(rng, *shape):
    x = rng.normal(size=shape)
    return np.sign(x) * (np.abs(x) + 0.5)


def _primitive_cases(rng):
    """One scalar-valued closure per differentiable op."""
    a = Tensor(_rows(rng, 3, 4), requires_grad=True)
    b = Tensor(_rows(rng, 3, 4), requires_grad=True)
    w = Tensor(_rows(rng, 4, 2), requires_grad=True)
    k = Tensor(_off_kink(rng, 3, 4), requires_grad=True)
    pos = Tensor(np.abs(rng.normal(size=(3, 4))) + 0.5, requires_grad=True)
    nz = Tensor(_away_from_zero(rng, 3, 4), requires_grad=True)
    v = Tensor(_rows(rng, 3), requires_grad=True)
    mix = Tensor(rng.normal(size=(3, 4)))
    scale = Tensor(_rows(rng, 3), requires_grad=True)
    idx = rng.integers(0, 3, size=5)
    scat_idx = rng.permutation(8)[:3]
    labels = rng.integers(0, 4, size=3)

    return {
        "add": (lambda: nc.tsum(nc.add(a, b)), [a, b]),
        "sub": (lambda: nc.tsum(nc.square(nc.sub(a, b))), [a, b]),
        "mul": (lambda: nc.tsum(nc.mul(a, b)), [a, b]),
        "matmul": (lambda: nc.tsum(nc.square(nc.matmul(a, w))), [a, w]),
        "relu": (lambda: nc.tsum(nc.relu(k)), [k]),
        "square": (lambda: nc.tsum(nc.square(a)), [a]),
        "exp": (lambda: nc.tsum(nc.exp(a)), [a]),
        "log": (lambda: nc.tsum(nc.log(pos)), [pos]),
        "reciprocal": (lambda: nc.tsum(nc.reciprocal(nz)), [nz]),
        "softmax": (lambda: nc.tsum(nc.mul(nc.softmax(a), mix)), [a]),
        "log_softmax": (lambda: nc.tsum(nc.mul(nc.log_softmax(a), mix)), [a]),
        "tsum": (lambda: nc.tsum(a), [a]),
        "tmean": (lambda: nc.tmean(nc.square(a)), [a]),
        "scale_rows": (lambda: nc.tsum(nc.square(nc.scale_rows(a, scale))),
                       [a, scale]),
        "take_column": (lambda: nc.tsum(nc.square(nc.take_column(a, 2))), [a]),
        "gather_rows": (lambda: nc.tsum(nc.square(nc.gather_rows(a, idx))), [a]),
        "scatter_rows": (lambda: nc.tsum(nc.square(nc.scatter_rows(a, scat_idx, 8))),
                         [a]),
        "concat_cols": (lambda: nc.tsum(nc.square(nc.concat_cols([a, b]))), [a, b]),
        "pick_per_row": (lambda: nc.tsum(nc.square(nc.pick_per_row(a, labels))),
                         [a]),
    }


def check_autodiff_primitives() -> str:
    worst, worst_name = 0.0, ""
    for seed in range(GRADCHECK_SEEDS):
        cases = _primitive_cases(np.random.default_rng(1000 + seed))
        for name, (fn, params) in cases.items():
            err = finite_difference_check(fn, params)
            if err > worst:
                worst, worst_name = err, name
            if err >= FD_TOL:
                raise CheckFailure(f"primitive {name} seed {seed}: "
                                   f"gradient error {err:.3e} >= {FD_TOL}")
    n = GRADCHECK_SEEDS * len(_primitive_cases(np.random.default_rng(0)))
    return f"{n} op checks, worst {worst:.2e} ({worst_name})"


# ---------------------------------------------------------------- check 1b

_TINY = MoEConfig(modalities=(("alpha", 5), ("beta", 3), ("gamma", 4)),
                  out_dim=2, experts_per_modality=2, z_dim=4, h_expert=6,
                  h_head=5, gate_hidden=8)


def _model_loss(model, feats, target, forced_mask=None):
    out, _ = model.forward(feats, forced_mask=forced_mask)
    loss = nc.tmean(nc.square(nc.sub(out, Tensor(target))))
    # small constant scale keeps finite-difference rounding noise for
    # near-zero gradient coordinates below the comparison floor
    return nc.mul(loss, Tensor(1e-4))


def check_autodiff_models() -> str:
    worst = 0.0
    for seed in range(GRADCHECK_SEEDS):
        rng = np.random.default_rng(2000 + seed)
        feats = [rng.normal(size=(4, w)) for _, w in _TINY.modalities]
        target = rng.normal(size=(4, _TINY.out_dim))

        dense = MoEModel(_TINY, seed=seed)
        err_d = finite_difference_check(
            lambda: _model_loss(dense, feats, target), dense.parameters())

        sparse = MoEModel(replace(_TINY, routing="sparse", top_n=3), seed=seed)
        _, decision = sparse.forward(feats)
        mask = decision.mask.copy()
        err_s = finite_difference_check(
            lambda: _model_loss(sparse, feats, target, forced_mask=mask),
            sparse.parameters())

        worst = max(worst, err_d, err_s)
        if max(err_d, err_s) >= FD_TOL:
            raise CheckFailure(f"model gradcheck seed {seed}: dense {err_d:.3e} "
                               f"sparse {err_s:.3e}, tolerance {FD_TOL}")
    return f"{GRADCHECK_SEEDS} seeds dense+sparse, worst {worst:.2e}"


# ----------------------------------------------------------------- check 2

def check_gating_simplex() -> str:
    model = MoEModel(replace(_TINY, routing="sparse", top_n=3), seed=0)
    rng = np.random.default_rng(7)
    worst_w, worst_r = 0.0, 0.0
    total = 0
    for _ in range(10):
        feats = [rng.normal(size=(10_000, w)) for _, w in _TINY.modalities]
        _, decision = model.forward(feats)
        w, r, mask = decision.weights, decision.renorm_weights, decision.mask
        if np.any(w < 0) or np.any(r < 0):
            raise CheckFailure("negative gating weight")
        if np.any(r[mask == 0] != 0):
            raise CheckFailure("renormalized weight outside the support")
        worst_w = max(worst_w, float(np.max(np.abs(w.sum(axis=1) - 1.0))))
        worst_r = max(worst_r, float(np.max(np.abs(r.sum(axis=1) - 1.0))))
        total += w.shape[0]
    if worst_w >= 1e-12:
        raise CheckFailure(f"softmax sum deviates by {worst_w:.3e} >= 1e-12")
    if worst_r >= 1e-9:
        raise CheckFailure(f"renormalized sum deviates by {worst_r:.3e} >= 1e-9")
    return (f"{total} evaluations, |sum w - 1| <= {worst_w:.2e}, "
            f"|sum w~ - 1| <= {worst_r:.2e}")


# ----------------------------------------------------------------- check 3

def _tiny_scenario(seed=21, slots=256):
    return ScenarioConfig(num_slots=slots, num_antennas=8, codebook_beams=8,
                          corruption=default_corruption(), rng_seed=seed)


def _tiny_moe(task, out_dim, routing="dense", top_n=None, seed=1):
    cfg = MoEConfig(modalities=task.model_input_widths(), out_dim=out_dim,
                    experts_per_modality=2, z_dim=8, h_expert=12, h_head=12,
                    gate_hidden=16, routing=routing,
                    top_n=top_n if top_n is not None else 5)
    return MoEModel(cfg, seed=seed)


def check_dense_sparse_equivalence() -> str:
    ds = generate_dataset(_tiny_scenario())
    task = TaskSpec(kind="beam_prediction")
    out_dim = task.out_dim(8, 8)
    e_total = len(task.model_input_widths()) * 2

    dense = _tiny_moe(task, out_dim)
    full = _tiny_moe(task, out_dim, routing="sparse", top_n=e_total)

    # same init stream regardless of routing mode
    for p, q in zip(dense.parameters(), full.parameters()):
        if not np.array_equal(p.data, q.data):
            raise CheckFailure("routing mode changed parameter init")

    # gradients on one batch
    idx = ds.train_indices[:16]
    feats = assemble_input(ds, task, idx)
    targets = normalized_targets(ds, task)[idx]
    worst_g = 0.0
    for model in (dense, full):
        model.zero_grad()
        with Tape() as tape:
            loss, _ = batch_loss(model, task, feats, targets)
        tape.backward(loss)
    for p, q in zip(dense.parameters(), full.parameters()):
        gp = p.grad if p.grad is not None else np.zeros_like(p.data)
        gq = q.grad if q.grad is not None else np.zeros_like(q.data)
        worst_g = max(worst_g, float(np.max(np.abs(gp - gq))))
    if worst_g >= 1e-6:
        raise CheckFailure(f"gradient gap {worst_g:.3e} >= 1e-6")

    # 5-epoch run: per-epoch metrics and final forward outputs
    tc = TrainConfig(epochs=5, batch_size=32, seed=3)
    dense2 = _tiny_moe(task, out_dim)
    full2 = _tiny_moe(task, out_dim, routing="sparse", top_n=e_total)
    res_d = run_training(ds, task, dense2, tc)
    res_f = run_training(ds, task, full2, tc)
    worst_m = 0.0
    for rd, rf in zip(res_d.metrics.rows, res_f.metrics.rows):
        gaps = [abs(rd.train_loss - rf.train_loss),
                abs(rd.metric_value - rf.metric_value)]
        gaps += [abs(rd.gate_mass[m] - rf.gate_mass[m]) for m in rd.gate_mass]
        worst_m = max(worst_m, max(gaps))
    if worst_m >= 1e-6:
        raise CheckFailure(f"per-epoch metric gap {worst_m:.3e} >= 1e-6")

    test_feats = assemble_input(ds, task, ds.test_indices[:64])
    out_d, _ = dense2.forward(test_feats)
    out_f, _ = full2.forward(test_feats)
    worst_o = float(np.max(np.abs(out_d.data - out_f.data)))
    if worst_o >= 1e-6:
        raise CheckFailure(f"forward output gap {worst_o:.3e} >= 1e-6")
    return (f"grads <= {worst_g:.2e}, epochs <= {worst_m:.2e}, "
            f"outputs <= {worst_o:.2e}")


# ----------------------------------------------------------------- check 4

def check_ste_sparsity() -> str:
    top_n = 2
    model = MoEModel(replace(_TINY, routing="sparse", top_n=top_n), seed=4)
    rng = np.random.default_rng(11)
    passes = 1000
    for i in range(passes):
        feats = [rng.normal(size=(1, w)) for _, w in _TINY.modalities]
        target = rng.normal(size=(1, _TINY.out_dim))
        model.zero_grad()
        with Tape() as tape:
            out, decision = model.forward(feats)
            loss = nc.tmean(nc.square(nc.sub(out, Tensor(target))))
        tape.backward(loss)
        row_counts = decision.mask.sum(axis=1)
        if not np.all(row_counts == top_n):
            raise CheckFailure(f"pass {i}: {row_counts} experts evaluated, "
                               f"expected exactly {top_n} per sample")
        selected = np.flatnonzero(decision.mask[0])
        for e, expert in enumerate(model.experts):
            if e in selected:
                continue
            for p in expert.parameters:
                if p.grad is not None and np.any(p.grad != 0.0):
                    raise CheckFailure(
                        f"pass {i}: unselected expert {e} received gradient")
    return f"{passes} passes, {top_n} of {model.cfg.num_experts} experts each"


# ----------------------------------------------------------------- check 5

def check_channel_algebra() -> str:
    rng = np.random.default_rng(13)
    spacing, wavelength = 0.025, 0.05

    worst_n = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 65))
        a = array_response(float(rng.uniform(-np.pi / 2, np.pi / 2)), m,
                           spacing, wavelength)
        worst_n = max(worst_n, abs(float(np.sum(np.abs(a) ** 2)) - m))
    if worst_n >= 1e-12:
        raise CheckFailure(f"array response norm error {worst_n:.3e} >= 1e-12")

    # additivity with real-positive line-of-sight gains (keeps path sets
    # valid: index 0 must dominate), plus complex-scalar homogeneity
    worst_l = 0.0
    for _ in range(100):
        L, M = 3, 16
        delays = rng.uniform(1e-7, 1e-6, size=L)
        aods = rng.uniform(-1.0, 1.0, size=L)

        def los_dominant():
            g = 0.1 * (rng.normal(size=L) + 1j * rng.normal(size=L))
            g[0] = 5.0 + abs(rng.normal())
            return g

        def mk(g):
            return synthesize_channel(PathSet(g, delays, aods), M,
                                      spacing, wavelength, 6e9)

        g1, g2 = los_dominant(), los_dominant()
        gap = np.max(np.abs(mk(g1 + g2) - (mk(g1) + mk(g2))))
        alpha = complex(rng.normal(), rng.normal())
        gap = max(gap, np.max(np.abs(mk(alpha * g1) - alpha * mk(g1))))
        worst_l = max(worst_l, float(gap))
    if worst_l >= 1e-12:
        raise CheckFailure(f"channel nonlinearity {worst_l:.3e} >= 1e-12")

    worst_r = 0.0
    noise = 1e-3
    for i in range(100):
        K = int(rng.integers(1, 4))
        M = 8
        h = rng.normal(size=(K, M)) + 1j * rng.normal(size=(K, M))
        v = rng.normal(size=(M, K)) + 1j * rng.normal(size=(M, K))
        v /= np.sqrt(np.sum(np.abs(v) ** 2))
        power = float(np.sum(np.abs(v) ** 2)) * 1.01
        got = sum_rate(h, v, noise, power)
        direct = 0.0
        for k in range(K):
            sig = abs(np.vdot(h[k], v[:, k])) ** 2
            interf = sum(abs(np.vdot(h[k], v[:, j])) ** 2
                         for j in range(K) if j != k)
            direct += np.log2(1.0 + sig / (interf + noise))
        worst_r = max(worst_r, abs(got - direct))
    if worst_r >= 1e-10:
        raise CheckFailure(f"sum rate mismatch {worst_r:.3e} >= 1e-10")

    codebook = dft_codebook(16, 24)
    hits = 0
    for _ in range(100):
        h = rng.normal(size=16) + 1j * rng.normal(size=16)
        best = optimal_beam(h, codebook)
        gains = [abs(np.sum(codebook[b] * np.conj(h))) ** 2 for b in range(24)]
        hits += int(best == int(np.argmax(gains)))
    if hits != 100:
        raise CheckFailure(f"optimal beam matched brute force {hits}/100")
    return (f"norm <= {worst_n:.2e}, linearity <= {worst_l:.2e}, "
            f"sum rate <= {worst_r:.2e}, beam sweep 100/100")


# ----------------------------------------------------------------- check 6

def check_determinism_persistence() -> str:
    task = TaskSpec(kind="beam_prediction")
    scenario = _tiny_scenario(seed=33, slots=192)
    tc = TrainConfig(epochs=4, batch_size=32, seed=5)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        ds_a = generate_dataset(scenario)
        ds_b = generate_dataset(scenario)
        write_dataset(ds_a, tmp / "a")
        write_dataset(ds_b, tmp / "b")
        if (tmp / "a" / "dataset.bin").read_bytes() != \
                (tmp / "b" / "dataset.bin").read_bytes():
            raise CheckFailure("same seed produced different dataset bytes")
        if (tmp / "a" / "manifest.json").read_text() != \
                (tmp / "b" / "manifest.json").read_text():
            raise CheckFailure("same seed produced different manifests")

        out_dim = task.out_dim(8, 8)
        runs = {}
        for tag in ("x", "y"):
            model = _tiny_moe(task, out_dim, seed=9)
            res = run_training(ds_a, task, model, tc,
                               checkpoint_path=tmp / f"{tag}.ckpt")
            runs[tag] = res
        csv_x = runs["x"].metrics.to_csv()
        if csv_x != runs["y"].metrics.to_csv():
            raise CheckFailure("same seed produced different metric CSVs")
        bytes_x = (tmp / "x.ckpt").read_bytes()
        if bytes_x != (tmp / "y.ckpt").read_bytes():
            raise CheckFailure("same seed produced different checkpoints")

        # save -> load -> save is byte stable
        loaded = load_checkpoint(tmp / "x.ckpt")
        save_checkpoint(tmp / "z.ckpt", loaded)
        if (tmp / "z.ckpt").read_bytes() != bytes_x:
            raise CheckFailure("checkpoint save/load round trip changed bytes")

        # interrupt after epoch 2, resume, compare with the straight run
        model = _tiny_moe(task, out_dim, seed=9)
        run_training(ds_a, task, model, tc, checkpoint_path=tmp / "r.ckpt",
                     stop_after_epoch=2)
        model = _tiny_moe(task, out_dim, seed=9)
        resumed = run_training(ds_a, task, model, tc,
                               checkpoint_path=tmp / "r.ckpt",
                               resume=load_checkpoint(tmp / "r.ckpt"))
        if resumed.metrics.to_csv() != csv_x:
            raise CheckFailure("resumed run CSV differs from straight run")
        if (tmp / "r.ckpt").read_bytes() != bytes_x:
            raise CheckFailure("resumed checkpoint differs from straight run")
    return "dataset, CSV, checkpoint, and resume round trips all bit-exact"


# ------------------------------------------------------------------ runner

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


CHECKS = (
    ("autodiff primitives", check_autodiff_primitives),
    ("autodiff full models", check_autodiff_models),
    ("gating simplex", check_gating_simplex),
    ("dense sparse equivalence", check_dense_sparse_equivalence),
    ("ste gradient sparsity", check_ste_sparsity),
    ("channel algebra", check_channel_algebra),
    ("determinism and persistence", check_determinism_persistence),
)


def run_selftest(log=print) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            detail, passed = fn(), True
        except CheckFailure as e:
            detail, passed = str(e), False
        except Exception as e:  # a crashed check is a failed check
            detail, passed = f"crashed: {type(e).__name__}: {e}", False
        dt = time.perf_counter() - start
        results.append(CheckResult(name, passed, detail, dt))
        log(f"{'PASS' if passed else 'FAIL'} {name} [{dt:.1f}s]: {detail}")
    return results
