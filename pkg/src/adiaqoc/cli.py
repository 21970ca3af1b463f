"""Command-line entry point: one subcommand per experiment."""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

from .experiments import EXPERIMENTS, ConfigError, config_from_dict, load_config, run_experiment
from .quantum import ValidationError

log = logging.getLogger("adiaqoc")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adiaqoc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="YAML config file (defaults are built in)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (default: the config's output)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for population and grid evaluations")
        p.add_argument("--budget", type=int, help="override the optimizer budget")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        config = (load_config(args.config, args.experiment) if args.config
                  else config_from_dict({"experiment": args.experiment}))
        config = config.with_overrides(seed=args.seed, output=args.out, budget=args.budget)
        if args.threads > 1:
            with ThreadPoolExecutor(args.threads) as pool:
                bundle = run_experiment(config, map_fn=pool.map)
        else:
            bundle = run_experiment(config)
    except (ConfigError, ValidationError, ValueError, OSError) as exc:
        print(f"adiaqoc {args.experiment}: error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.experiment}: results written to {bundle.root}")
    for key, value in sorted(bundle.summary.items()):
        if not isinstance(value, dict):
            print(f"  {key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
