"""Command-line interface: run, merge and validate experiments.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import config as config_mod
from . import experiments
from .errors import ConfigError, NumericalError
from .report import write_report

log = logging.getLogger("sheavg")


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, _, hi = text.partition(":")
        return int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"replica range {text!r} must look like LO:HI") from None


def _load_config(args) -> config_mod.ExperimentConfig:
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
    overrides = list(args.override or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"experiment.seed={args.seed}")
    if getattr(args, "replicas", None) is not None:
        overrides.append(f"experiment.replicas={args.replicas}")
    if getattr(args, "out", None) is not None:
        overrides.append(f"output.directory={json.dumps(args.out)}")
    data = config_mod.apply_overrides(data, overrides)
    return config_mod.build(data)


def _cmd_validate(args) -> int:
    cfg = _load_config(args)
    print(f"ok: {cfg.kind} experiment, d={cfg.family.shape[0]} m={cfg.family.shape[1]}, "
          f"grid nt={cfg.grid.nt} nx={cfg.grid.nx}, hash {cfg.config_hash[:12]}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    replica_range = _parse_range(args.replica_range) if args.replica_range else None
    report = experiments.run(cfg, replica_range=replica_range, workers=args.workers)
    paths = write_report(report, cfg.output_directory)
    log.info("experiment %s finished in %.1fs", cfg.kind,
             report.timing["wall_seconds"])
    for path in paths:
        print(path)
    return 0


def _cmd_merge(args) -> int:
    report = experiments.merge(args.reports)
    report.config["output"]["directory"] = args.out
    paths = write_report(report, args.out)
    for path in paths:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sheavg",
        description="Simulation and verification toolkit for spatial averages "
                    "of coupled stochastic heat equations.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file")
    run_p.add_argument("--config", required=True, help="path to the JSON config")
    run_p.add_argument("--seed", type=int, help="override experiment.seed")
    run_p.add_argument("--replicas", type=int, help="override experiment.replicas")
    run_p.add_argument("--replica-range", help="run only replicas LO:HI of the batch")
    run_p.add_argument("--workers", type=int, default=1,
                       help="worker processes for replica chunks")
    run_p.add_argument("--out", help="override output.directory")
    run_p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="set a config entry by dotted path (repeatable)")
    run_p.set_defaults(func=_cmd_run)

    merge_p = sub.add_parser("merge", help="merge partial reports into one")
    merge_p.add_argument("reports", nargs="+", help="directories of partial reports")
    merge_p.add_argument("--out", required=True, help="output directory")
    merge_p.set_defaults(func=_cmd_merge)

    val_p = sub.add_parser("validate", help="validate a config without running")
    val_p.add_argument("--config", required=True)
    val_p.add_argument("--seed", type=int)
    val_p.add_argument("--replicas", type=int)
    val_p.add_argument("--out")
    val_p.add_argument("--override", action="append", metavar="KEY=VALUE")
    val_p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
