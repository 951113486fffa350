"""Command-line entry points: train, eval, show-model, benchmark."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .metrics import compute_metrics, write_results_csv, write_traces_jsonl
from .persistence import load_state, save_state
from .runner import MontySystem, run_experiment
from . import suite as suites


def _write_outputs(results, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(results, out_dir / "episodes.csv")
    write_traces_jsonl(results, out_dir / "traces.jsonl")
    metrics = compute_metrics(results)
    for line in metrics.summary_lines():
        print(line)


def cmd_train(args) -> int:
    config = ExperimentConfig.load(args.config)
    config.mode = "train"
    if args.seed is not None:
        config.seed = args.seed
    if args.log_cmp:
        config.log_cmp = args.log_cmp
    system, results = run_experiment(config)
    out = Path(args.out)
    _write_outputs(results, out)
    save_state(system, out / "state.json")
    print(f"saved state to {out / 'state.json'}")
    return 0


def cmd_eval(args) -> int:
    config = ExperimentConfig.load(args.config)
    config.mode = "eval"
    if args.seed is not None:
        config.seed = args.seed
    if args.log_cmp:
        config.log_cmp = args.log_cmp
    system = load_state(args.models, config)
    system, results = run_experiment(config, system)
    _write_outputs(results, Path(args.out))
    return 0


def cmd_show_model(args) -> int:
    with open(args.models) as fh:
        payload = json.load(fh)
    for lm_id, lm in sorted(payload.get("lms", {}).items()):
        models = lm.get("models", {})
        if args.object not in models:
            continue
        m = models[args.object]
        labels = lm.get("model_to_gt", {}).get(args.object, [])
        print(f"{lm_id}/{args.object}: {len(m['locations'])} nodes, seen as {labels}")
        print(f"{'x':>10} {'y':>10} {'z':>10}   {'normal':>32}   features")
        feats = m.get("features", {})
        for i, loc in enumerate(m["locations"]):
            n = m["normals"][i]
            fs = ", ".join(
                f"{k}={np.round(np.asarray(v[i]), 3).tolist()}" for k, v in sorted(feats.items())
            )
            print(
                f"{loc[0]:10.4f} {loc[1]:10.4f} {loc[2]:10.4f}   "
                f"[{n[0]:8.4f} {n[1]:8.4f} {n[2]:8.4f}]   {fs}"
            )
        return 0
    print(f"object {args.object!r} not found in {args.models}", file=sys.stderr)
    return 1


def _benchmark_recognition(out_dir: Path | None) -> int:
    train_cfg = suites.train_config()
    print("training one epoch on the benchmark objects (spiral scan)...")
    system, train_results = run_experiment(train_cfg)
    eval_cfg = suites.eval_config()
    eval_cfg.mode = "eval"
    print("evaluating at three held-out 90-degree rotations per object...")
    system.config = eval_cfg
    fresh = MontySystem(eval_cfg)
    fresh.lms = system.lms
    for lm in fresh.lms.values():
        lm.config = eval_cfg.lm_config
    _, results = run_experiment(eval_cfg, fresh)
    metrics = compute_metrics(results)
    for line in metrics.summary_lines():
        print(line)
    if out_dir:
        _write_outputs(results, out_dir)
        save_state(fresh, out_dir / "state.json")
    return 0


def cmd_benchmark(args) -> int:
    out = Path(args.out) if args.out else None
    if args.suite == "recognition":
        return _benchmark_recognition(out)
    if args.suite == "kernels":
        # keep the heavy timing loop in one place: the benchmarks/ script
        root = Path(__file__).resolve().parents[3] / "benchmarks"
        sys.path.insert(0, str(root))
        try:
            import bench_evidence

            bench_evidence.main()
            return 0
        except ImportError:
            print("benchmarks/bench_evidence.py not found", file=sys.stderr)
            return 1
    print(f"unknown suite {args.suite!r} (available: recognition, kernels)", file=sys.stderr)
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="somrec",
        description="Sensorimotor object recognition: train, evaluate, inspect.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="learn object models from scratch")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--log-cmp", default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate saved models")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--models", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--log-cmp", default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_show = sub.add_parser("show-model", help="dump one object model's node table")
    p_show.add_argument("--models", required=True)
    p_show.add_argument("--object", required=True)
    p_show.set_defaults(func=cmd_show_model)

    p_bench = sub.add_parser("benchmark", help="run a canned suite")
    p_bench.add_argument("--suite", required=True)
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        t0 = time.perf_counter()
        code = args.func(args)
        print(f"done in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        return code
    except Exception as e:  # CLI contract: nonzero exit on any error
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
