"""Command-line operator surface.

Subcommands: ``run`` (train and evaluate per seed), ``ablate`` (four-variant
mechanism sweep with metrics normalized to the full adaptive model),
``boundary`` (export the gradient-coefficient curve), ``eval`` (offline
metrics from CSV logs). Exit codes: 0 success, 1 config or input error,
2 runtime numeric abort, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bounds import write_boundary_curve
from .config import ConfigError, ExperimentConfig, load_experiment_config
from .metrics import (
    evaluate_rankings,
    load_cold_set,
    load_ground_truth,
    load_rankings,
)
from .policy import save_checkpoint
from .simenv import World, build_world, item_vectors, load_catalog
from .trainer import evaluate_policy, train

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_IO = 3

SUMMARY_METRICS = ("recall_at_k", "ndcg_at_k", "entropy_at_k", "ild", "cold_recall")
ABLATION_VARIANTS = (
    ("full", "sage"),
    ("no_boost", "sage-no-boost"),
    ("no_entropy", "sage-no-entropy"),
    ("no_decoupling", "sage-no-decoupling"),
)
BOUNDARY_GRID = tuple(k / 20 for k in range(1, 51))
ERROR_MANIFEST_SCHEMA_VERSION = 1


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message, file=sys.stderr)


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True) + "\n")


class NumericAbort(RuntimeError):
    """A training abort annotated with where it happened, for the manifest."""

    def __init__(self, message: str, seed: int, variant: str | None = None):
        super().__init__(message)
        self.seed = seed
        self.variant = variant


def _train_and_eval(
    config: ExperimentConfig, seed: int, world: World, out_dir: Path, variant: str | None
) -> dict:
    try:
        result = train(config.train_for_seed(seed), world)
    except RuntimeError as exc:
        raise NumericAbort(str(exc), seed=seed, variant=variant) from exc
    metrics = evaluate_policy(
        result.params, world, config.metrics.k, entropy_base=config.metrics.entropy_base
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    result.report.save_jsonl(out_dir / "report.jsonl")
    _write_json(out_dir / "metrics.json", metrics)
    save_checkpoint(result.params, out_dir / "checkpoint.json")
    return metrics


def _write_error_manifest(out: Path, command: str, abort: NumericAbort) -> None:
    manifest = {
        "schema_version": ERROR_MANIFEST_SCHEMA_VERSION,
        "kind": "error_manifest",
        "command": command,
        "seed": abort.seed,
        "variant": abort.variant,
        "message": str(abort),
    }
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "error.json", manifest)


def _write_summary(path: Path, per_seed: dict[int, dict]) -> None:
    """One row per (metric, seed) plus an aggregate mean/std row per metric."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("metric", "seed", "value", "std"))
        for metric in SUMMARY_METRICS:
            values = []
            for seed, metrics in per_seed.items():
                value = metrics[metric]
                writer.writerow((metric, seed, _fmt(value), ""))
                if value is not None:
                    values.append(float(value))
            if values:
                arr = np.asarray(values)
                writer.writerow((metric, "aggregate", _fmt(arr.mean()), _fmt(arr.std())))
            else:
                writer.writerow((metric, "aggregate", "", ""))


def cmd_run(config: ExperimentConfig, quiet: bool) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_seed: dict[int, dict] = {}
    try:
        for seed in config.seeds:
            _say(
                quiet,
                f"seed {seed}: {config.train.optimizer}, "
                f"{config.train.total_steps} steps",
            )
            world = build_world(config.world, seed=seed)
            per_seed[seed] = _train_and_eval(
                config, seed, world, out / f"seed_{seed}", variant=None
            )
    except NumericAbort as abort:
        _write_error_manifest(out, "run", abort)
        print(f"numeric abort at seed {abort.seed}: {abort}", file=sys.stderr)
        return EXIT_NUMERIC
    _write_summary(out / "summary.csv", per_seed)
    _say(quiet, f"wrote {len(per_seed)} seed directories and summary.csv to {out}")
    return EXIT_OK


def _mean_metrics(per_seed: dict[int, dict]) -> dict[str, float | None]:
    means: dict[str, float | None] = {}
    for metric in SUMMARY_METRICS:
        values = [m[metric] for m in per_seed.values() if m[metric] is not None]
        means[metric] = float(np.mean(values)) if values else None
    return means


def cmd_ablate(config: ExperimentConfig, quiet: bool) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # Variants must see identical worlds, so worlds are built once per seed.
    worlds = {seed: build_world(config.world, seed=seed) for seed in config.seeds}
    means: dict[str, dict[str, float | None]] = {}
    try:
        for variant, optimizer in ABLATION_VARIANTS:
            per_seed: dict[int, dict] = {}
            for seed in config.seeds:
                _say(quiet, f"{variant}: seed {seed} ({optimizer})")
                variant_config = replace(config, train=replace(config.train, optimizer=optimizer))
                per_seed[seed] = _train_and_eval(
                    variant_config,
                    seed,
                    worlds[seed],
                    out / "ablation" / variant / f"seed_{seed}",
                    variant=variant,
                )
            means[variant] = _mean_metrics(per_seed)
    except NumericAbort as abort:
        _write_error_manifest(out, "ablate", abort)
        print(
            f"numeric abort in variant {abort.variant} seed {abort.seed}: {abort}",
            file=sys.stderr,
        )
        return EXIT_NUMERIC

    full = means["full"]
    with open(out / "ablation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("variant", "metric", "value", "normalized"))
        for variant, _ in ABLATION_VARIANTS:
            for metric in SUMMARY_METRICS:
                value = means[variant][metric]
                base = full[metric]
                if value is None or base is None or base == 0.0:
                    normalized = None
                else:
                    normalized = value / base
                writer.writerow((variant, metric, _fmt(value), _fmt(normalized)))
    _say(quiet, f"wrote ablation artifacts and ablation.csv to {out}")
    return EXIT_OK


def cmd_boundary(config: ExperimentConfig, quiet: bool) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "boundary.csv"
    rows = write_boundary_curve(path, BOUNDARY_GRID, config.train.bounds)
    _say(quiet, f"wrote {len(rows)} boundary rows to {path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    truth = load_ground_truth(args.truth)
    recs = load_rankings(args.recommendations, truth)
    cold = load_cold_set(args.cold, require_nonempty=False)
    if args.catalog is not None:
        catalog = load_catalog(args.catalog)
        categories = catalog.categories
        vectors = item_vectors(catalog)
    else:
        categories = None
        vectors = None
    metrics = evaluate_rankings(
        recs, categories, vectors, cold, args.k, entropy_base=None
    )
    text = json.dumps(metrics, sort_keys=True)
    print(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval_metrics.json").write_text(text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--seed-override",
        type=int,
        default=None,
        metavar="SEED",
        help="replace the config's seed list with this one seed",
    )
    common.add_argument(
        "--out", default=None, metavar="DIR", help="override the output directory"
    )
    common.add_argument(
        "--quiet", action="store_true", help="suppress progress messages"
    )
    parser = argparse.ArgumentParser(
        prog="sagerec",
        description="Bounded policy optimization for slate recommendation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", parents=[common], help="train and evaluate per seed")
    run_p.add_argument("config", help="experiment config (.yaml or .json)")

    ablate_p = sub.add_parser(
        "ablate", parents=[common], help="four-variant mechanism sweep"
    )
    ablate_p.add_argument("config", help="experiment config (.yaml or .json)")

    boundary_p = sub.add_parser(
        "boundary", parents=[common], help="export the gradient-coefficient curve"
    )
    boundary_p.add_argument("config", help="experiment config (.yaml or .json)")

    eval_p = sub.add_parser(
        "eval", parents=[common], help="offline metrics from CSV logs"
    )
    eval_p.add_argument("recommendations", help="rankings CSV (user_id,rank,item_id)")
    eval_p.add_argument("truth", help="ground-truth CSV (user_id,item_id)")
    eval_p.add_argument("cold", help="cold-item file, one id per line (may be empty)")
    eval_p.add_argument("-k", type=int, default=10, help="ranking depth (default 10)")
    eval_p.add_argument(
        "--catalog",
        default=None,
        help="catalog JSON enabling the entropy and diversity metrics",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "eval":
            return cmd_eval(args)
        config = load_experiment_config(
            args.config, out_override=args.out, seed_override=args.seed_override
        )
        if args.command == "run":
            return cmd_run(config, args.quiet)
        if args.command == "ablate":
            return cmd_ablate(config, args.quiet)
        return cmd_boundary(config, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
