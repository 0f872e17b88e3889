"""Command line entry point: ``sparsegrow {train,sweep-gamma,bench,flops}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..bench_suite import (
    DEFAULT_SIZES,
    DEFAULT_SPARSITIES,
    FORMATS,
    crossover_report,
    format_crossover,
    run_bench,
    sweep_cases,
    write_csv,
)
from ..dst_engine import InfeasibleSparsityError
from .config import ConfigError, load_config
from .runner import DataMissingError, NumericError, run_flops_report, run_gamma_sweep, run_training

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SPARSITY, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _train(args):
    config = load_config(args.config)
    result = run_training(config, args.out)
    f = result.final
    print(f"epoch {f.epoch} step {f.step}: test_acc={f.test_acc:.4f} train_loss={f.train_loss:.4f} "
          f"active={f.active_connections} rounds={f.rounds_done} -> {result.output_dir}")


def _sweep(args):
    config = load_config(args.config)
    results = run_gamma_sweep(config, args.gammas, args.seeds, args.out)
    for gamma, accs in results.items():
        print(f"gamma={gamma:g}: mean test_acc={sum(accs) / len(accs):.4f} over {len(accs)} run(s)")


def _bench(args):
    cases = sweep_cases(args.sizes, args.sparsities, args.formats, args.batch, args.repeats)
    results = run_bench(cases, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(results, out / "bench.csv")
    report = format_crossover(crossover_report(results))
    (out / "crossover.csv").write_text(report)
    print(report, end="")


def _flops(args):
    config = load_config(args.config)
    rows = run_flops_report(config, args.sparsities, args.out)
    for row in rows:
        if row[2] != "static":
            print(",".join(str(v) for v in (row[0], row[1], row[2], row[6])))


def build_parser():
    parser = argparse.ArgumentParser(prog="sparsegrow", description="Always-sparse training experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model from a config file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.set_defaults(func=_train)

    p = sub.add_parser("sweep-gamma", help="one run per (gamma, seed)")
    p.add_argument("config")
    p.add_argument("--gammas", type=float, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=_sweep)

    p = sub.add_parser("bench", help="time dense, COO and CSR products")
    p.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_SIZES))
    p.add_argument("--sparsities", type=float, nargs="+", default=list(DEFAULT_SPARSITIES))
    p.add_argument("--formats", nargs="+", choices=FORMATS, default=list(FORMATS))
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/bench")
    p.set_defaults(func=_bench)

    p = sub.add_parser("flops", help="analytic training FLOPs per strategy")
    p.add_argument("config")
    p.add_argument("--sparsities", type=float, nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=_flops)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataMissingError as err:
        print(f"dataset missing: {err}", file=sys.stderr)
        return EXIT_DATA
    except InfeasibleSparsityError as err:
        print(f"infeasible sparsity: {err}", file=sys.stderr)
        return EXIT_SPARSITY
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
