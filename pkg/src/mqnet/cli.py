"""Command-line entry point: ``mqnet run | sweep | grid``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, parse_config
from .meta import load_checkpoint, save_checkpoint
from .simulator import STRATEGIES, RunTrace, run_experiment
from .sweep import emit_score_grid, run_sweep, write_run_csv


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--noise-ratio", type=float)
    p.add_argument("--budget", type=float)
    p.add_argument("--rounds", type=int)
    p.add_argument("--cost-ood", type=float)
    p.add_argument("--out", type=str, help="output directory (default: $MQNET_OUT_DIR or ./mqnet_out)")
    p.add_argument("--strict-margin", action="store_true", default=None,
                   help="use the enforcing-margin ranking loss variant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a single experiment")
    _common(run)

    sweep = sub.add_parser("sweep", help="run a strategy/noise/cost/seed grid")
    _common(sweep)
    sweep.add_argument("--jobs", type=int, help="worker processes")

    grid = sub.add_parser("grid", help="emit the meta-score landscape as CSV")
    _common(grid)
    grid.add_argument("--checkpoint", type=Path,
                      help="meta-model checkpoint; if omitted an mqnet run trains one")
    grid.add_argument("--resolution", type=int, default=25)
    grid.add_argument("--grid-min", type=float, default=0.05)
    grid.add_argument("--grid-max", type=float, default=5.0)
    return parser


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "strategy": args.strategy,
        "noise_ratio": args.noise_ratio,
        "budget": args.budget,
        "rounds": args.rounds,
        "cost_ood": args.cost_ood,
        "out_dir": args.out,
        "strict_margin": args.strict_margin,
        "jobs": getattr(args, "jobs", None),
    }


def _print_records(records) -> None:
    print(f"{'round':>5} {'acc':>7} {'%IN':>6} {'cost':>7} {'auroc':>7}")
    for r in records:
        print(f"{r.round_index:>5} {r.test_accuracy:7.4f} {r.query_in_ratio:6.3f} "
              f"{r.cost_spent:7.2f} {r.purity_auroc:7.4f}")


def cmd_run(spec) -> int:
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = spec.base
    trace = RunTrace()
    records = run_experiment(cfg, trace)
    write_run_csv(records, out / "run.csv")
    if cfg.strategy == "mqnet":
        save_checkpoint(trace.mlp, out / "checkpoint.json")
    _print_records(records)
    print(f"wrote {out / 'run.csv'}")
    return 0


def cmd_sweep(spec) -> int:
    rows = run_sweep(spec)
    print(f"{len(spec.cells())} cells, {len(rows)} aggregate rows -> {spec.out_dir}")
    return 1 if (Path(spec.out_dir) / "failures.csv").exists() else 0


def cmd_grid(spec, args) -> int:
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.checkpoint is not None:
        mlp = load_checkpoint(args.checkpoint)
    else:
        trace = RunTrace()
        run_experiment(replace(spec.base, strategy="mqnet"), trace)
        mlp = trace.mlp
        save_checkpoint(mlp, out / "checkpoint.json")
    path = emit_score_grid(mlp, out / "score_grid.csv",
                           (args.grid_min, args.grid_max), args.resolution)
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = parse_config(args.config, _overrides(args))
        if args.command == "run":
            return cmd_run(spec)
        if args.command == "sweep":
            return cmd_sweep(spec)
        return cmd_grid(spec, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
