"""Command line: ``samplogit run <job> --config <path> --out <dir> [--seed N]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import JOBS, load_config, run_job


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samplogit", description="Run a sampling-logit experiment job.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one job and write its tables")
    run.add_argument("job", choices=sorted(JOBS))
    run.add_argument("--config", required=True, help="TOML file with [game] and [params] tables")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config, "rb") as fh:
            raw = fh.read()
        config = load_config(args.config)
        files = run_job(args.job, config, args.out, seed=args.seed, config_bytes=raw)
    except Exception as exc:  # any module error maps to a nonzero exit
        print(f"samplogit: {args.job} failed: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
