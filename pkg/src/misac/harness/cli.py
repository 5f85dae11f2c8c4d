"""misac command line: gen-data, train, eval, compare, selftest.

Exit codes: 0 success, 1 runtime failure (I/O, hash mismatch, training
blow-up), 2 configuration errors (unknown keys, bad values, bad JSON).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..baselines import BaselineError
from ..chansim import ConfigError
from ..moefusion import RoutingError
from ..tasks import ConfigurationError
from .compare import compare_runs
from .config import experiment_hash, load_experiment, scenario_hash_hex
from .runner import eval_checkpoint, dry_run_report, gen_data, run_experiment
from .selftest import run_selftest

CONFIG_ERRORS = (ConfigurationError, ConfigError, BaselineError, RoutingError)


def _cmd_gen_data(args) -> int:
    cfg = load_experiment(args.config)
    (bin_path, man_path), ds = gen_data(cfg, args.out)
    print(f"config_hash={experiment_hash(cfg)}")
    print(f"scenario_hash={scenario_hash_hex(cfg)}")
    print(f"wrote {bin_path} ({len(ds)} slots) and {man_path}")
    return 0


def _cmd_train(args) -> int:
    cfg = load_experiment(args.config)
    if args.dry_run:
        print(dry_run_report(cfg))
        return 0
    print(f"config_hash={experiment_hash(cfg)}")
    run_experiment(cfg, data_dir=args.data, resume=args.resume,
                   parallel=args.parallel, log=print)
    return 0


def _cmd_eval(args) -> int:
    s = eval_checkpoint(args.checkpoint, args.data)
    r = s.report
    print(f"config_hash={s.checkpoint.extra['config_hash']}")
    print(f"model={s.checkpoint.model_kind} seed={s.seed} "
          f"epoch={s.checkpoint.epoch}")
    print(f"{r.metric_name}={r.metric_value:.9g}  test_loss={r.mean_loss:.9g}")
    for key, value in sorted(r.extras.items()):
        print(f"{key}={value:.9g}")
    print(f"final CSV row reproduced: {'yes' if s.matches_final_row else 'NO'}")

    print("gate mass by modality (clean vs corrupted slots):")
    for mod, row in s.adaptivity.items():
        clean = "n/a" if row["clean"] is None else f"{row['clean']:.4f}"
        corr = "n/a" if row["corrupted"] is None else f"{row['corrupted']:.4f}"
        print(f"  {mod:<12} clean={clean:<8} corrupted={corr:<8} "
              f"({row['corrupted_slots']} corrupted slots)")

    counts = r.expert_eval_counts.astype(int)
    n_samples = int(round(counts.sum() / r.extras["expert_evals_per_sample"]))
    print(f"expert evaluation histogram over {n_samples} test samples:")
    print("  " + " ".join(str(c) for c in counts)
          + f"  (total {int(counts.sum())} = "
          f"{r.extras['expert_evals_per_sample']:g} per sample)")
    return 0


def _cmd_compare(args) -> int:
    table = compare_runs(args.csvs, threshold=args.threshold)
    sys.stdout.write(table.to_text())
    if args.out:
        Path(args.out).write_text(table.to_csv())
        print(f"wrote {args.out}")
    return 0


def _cmd_selftest(args) -> int:
    results = run_selftest(log=print)
    failed = [r for r in results if not r.passed]
    total = sum(r.seconds for r in results)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed "
          f"in {total:.1f}s")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="misac",
        description="multimodal sensing-and-communication experiment runner")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate and persist a dataset")
    g.add_argument("config", help="experiment config JSON")
    g.add_argument("--out", default=None,
                   help="output directory (default <output_dir>/dataset)")
    g.set_defaults(func=_cmd_gen_data)

    t = sub.add_parser("train", help="train every configured seed")
    t.add_argument("config", help="experiment config JSON")
    t.add_argument("--data", default=None,
                   help="dataset directory (default <output_dir>/dataset)")
    t.add_argument("--resume", action="store_true",
                   help="continue from existing per-seed checkpoints")
    t.add_argument("--dry-run", action="store_true",
                   help="validate config and print the parameter count")
    t.add_argument("--parallel", action="store_true",
                   help="one process per seed, capped by MISAC_THREADS")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="re-evaluate a trained checkpoint")
    e.add_argument("checkpoint", help="checkpoint.bin from a training run")
    e.add_argument("data", help="dataset directory")
    e.set_defaults(func=_cmd_eval)

    c = sub.add_parser("compare", help="summarize metrics CSVs across models")
    c.add_argument("csvs", nargs="+", help="metrics.csv files")
    c.add_argument("--threshold", type=float, default=None,
                   help="metric threshold for epochs-to-threshold")
    c.add_argument("--out", default=None, help="also write a summary CSV here")
    c.set_defaults(func=_cmd_compare)

    s = sub.add_parser("selftest", help="run the exact property suite")
    s.set_defaults(func=_cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
