"""Command-line entry point: ``jsdm <experiment> --config PATH --out DIR``.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures (infeasible precoders, fixed points that do not converge).
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from .config import EXPERIMENTS, validate_config
from .errors import ConfigError, InvalidParameterError, JsdmError
from .experiments import run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("jsdm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jsdm", description="Seeded JSDM downlink experiments.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="flat key = value configuration file")
    parser.add_argument("--out", required=True, help="output root; results go to <out>/<experiment>-<hash8>/")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--trials", type=int, help="override the configured trial count")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {"seed": args.seed, "trials": args.trials}
    result = validate_config(args.config, overrides)
    errors = list(result.errors)
    if result.config.get("experiment", args.experiment) != args.experiment:
        errors.append(f"config names experiment '{result.config['experiment']}', "
                      f"command line asks for '{args.experiment}'")
    if errors:
        for err in ConfigError(errors).errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run_experiment(result.config, args.out, result.defaulted)
    except (InvalidParameterError, OSError) as exc:
        # parameter combinations the schema cannot see, e.g. a bad population file
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (JsdmError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for key in result.defaulted:
        log.info("default %s = %s", key, result.config[key])
    print(table.out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
