"""Command line entry point: ``nystrom-landmarks {sweep,scores,check}``.

Exit codes: 0 on success, 2 for configuration or input errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .errors import CapacityError, ConfigError, DataQualityError, DomainError, SingularMatrixError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("nystrom_landmarks")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value file; flags override its entries")
    p.add_argument("--data", help="CSV file with one point per row")
    p.add_argument("--format", help=f"one of {', '.join(harness.FORMATS)}")
    p.add_argument("--n-points", help="size of a generated dataset")
    p.add_argument("--data-seed")
    p.add_argument("--drop-column", help="CSV column index to drop (e.g. a label)")
    p.add_argument("--kernel", help="gaussian or laplace")
    p.add_argument("--sigma", help="kernel bandwidth")
    p.add_argument("--gammas", nargs="+", help="ridge regularization values")
    p.add_argument("--epsilon")
    p.add_argument("--c", help="RAS oversampling factor")
    p.add_argument("--t", help="RAS score inflation, in (0, 1)")
    p.add_argument("--delta", help="failure probability for the oversampling bound")
    p.add_argument("--methods", nargs="+", help=f"subset of {', '.join(harness.METHODS)}")
    p.add_argument("--k", nargs="+", help="landmark counts, or 'from-ras'")
    p.add_argument("--seeds", nargs="+")
    p.add_argument("--metrics", nargs="+", help=f"subset of {', '.join(harness.METRICS)}")
    p.add_argument("--subset-size")
    p.add_argument("--num-subsets")
    p.add_argument("--n-features", help="random Fourier features for approx-ras")
    p.add_argument("--mu", help="Nystrom regularization used when scoring landmark sets")
    p.add_argument("--max-exact-n", help="largest n for which dense n x n work is allowed")
    p.add_argument("--trials", help="Monte-Carlo trials for the check subcommand")
    p.add_argument("--output", help="output prefix (sweep) or file (scores, check)")
    p.add_argument("--workers", help=f"worker threads; defaults to ${harness.WORKERS_ENV} or 1")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nystrom-landmarks", description="Nystrom landmark selection experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("sweep", help="error of each method over gammas, k and seeds"))
    p = sub.add_parser("scores", help="per-point leverage and Christoffel scores, or the DAS trace")
    _add_common(p)
    p.add_argument("--kind", choices=("points", "das"), default="points")
    _add_common(sub.add_parser("check", help="run the guarantee checks and report pass/fail as JSON"))
    return parser


_NON_CONFIG = {"command", "config", "verbose", "kind"}


def config_from_args(args: argparse.Namespace) -> harness.ExperimentConfig:
    file_values = harness.read_config_file(args.config) if args.config else {}
    overrides = {}
    for key, value in vars(args).items():
        if key in _NON_CONFIG or value is None:
            continue
        overrides[key] = harness.coerce(key, value)
    return harness.build_config(file_values, overrides)


def _emit(text: str, output: str | None, default_name: str | None):
    if output is None and default_name is None:
        sys.stdout.write(text)
        return
    path = Path(output or default_name)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(path)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
        output_given = args.output is not None
        if args.command == "sweep":
            result = harness.run_sweep(config)
            for path in result.write(config.output):
                print(path)
        elif args.command == "scores":
            text = harness.dump_scores(config, args.kind)
            _emit(text, args.output if output_given else None, None)
        elif args.command == "check":
            report = harness.check_bounds(config)
            text = json.dumps(report, indent=2, sort_keys=True) + "\n"
            _emit(text, args.output if output_given else None, None)
    except (ConfigError, DataQualityError, DomainError, CapacityError, FileNotFoundError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularMatrixError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
