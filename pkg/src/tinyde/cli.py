"""Experiment command line: ``tinyde <subcommand> --config <file> ...``.

Subcommands map onto the experiment drivers; every flag overrides the
corresponding TOML config key.  Exit codes: 0 success, 2 configuration
error, 3 data error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .errors import ConfigError, DataError
from .experiments import (ExperimentConfig, cmd_cim, cmd_cost, cmd_ood,
                          cmd_reproduce_uci, format_summary_table)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

_SUBCOMMANDS = {
    "reproduce-uci": ("uci-regression", cmd_reproduce_uci),
    "ood": ("ood-classification", cmd_ood),
    "cost": ("cost-census", cmd_cost),
    "cim": ("cim-study", cmd_cim),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tinyde",
        description="Shared-weight normalization-ensemble experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML experiment config")
        p.add_argument("--jobs", type=int, help="fold-level parallelism")
        p.add_argument("--seed", type=int, help="experiment seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--data-dir", help="dataset root (or $TINYDE_DATA_DIR)")
        p.add_argument("--ensemble-size", type=int, dest="M",
                       help="number of ensemble members")
        p.add_argument("--epochs", type=int)
        p.add_argument("--datasets", nargs="*",
                       help="benchmark dataset keys (reproduce-uci)")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {args.config}: {exc}") from exc
    doc["task"] = _SUBCOMMANDS[args.command][0]
    overrides = {
        "jobs": args.jobs, "seed": args.seed, "out_dir": args.out,
        "data_dir": args.data_dir, "M": args.M, "epochs": args.epochs,
        "datasets": args.datasets,
    }
    for key, value in overrides.items():
        if value is not None:
            doc[key] = value
    return ExperimentConfig.from_dict(doc)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        rows = _SUBCOMMANDS[args.command][1](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - map to a stable exit code
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(format_summary_table(rows))
    print(f"results written to {cfg.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
