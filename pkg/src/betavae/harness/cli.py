"""Command-line entry point: ``betavae <command> [options]``.

Exit status: 0 when every run succeeded, 2 when some runs failed or
diverged, 1 on configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..fid import fid_from_activation_files
from .config import ConfigError, ExperimentConfig, format_config, load_config
from .records import export_records, format_summary, load_records, summary_table
from .runner import Workspace, load_data, run

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment config file (defaults used if omitted)")
    p.add_argument("--seed", type=int, action="append", help="seed to run (repeatable)")
    p.add_argument("--beta", type=float, action="append", help="beta to run (repeatable)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--resume", action="store_true", help="skip runs that already have records")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="betavae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("train", "train models and write checkpoints"),
                        ("score", "disentanglement metric of trained checkpoints"),
                        ("sweep", "train, score and compute FID for every seed and beta"),
                        ("traverse", "latent traversal grids and ground-truth embeddings")):
        _common(sub.add_parser(name, help=help_))
    p = sub.add_parser("fid", help="FID of trained checkpoints, or between two activation files")
    _common(p)
    p.add_argument("--real", type=Path, help="activation file of real images")
    p.add_argument("--generated", type=Path, help="activation file of generated images")
    p = sub.add_parser("export", help="export records and print the summary table")
    _common(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--metric", default="accuracy")
    p.add_argument("--all-configs", action="store_true", help="include records of every config hash")
    p = sub.add_parser("config", help="print the effective configuration")
    _common(p)
    return parser


STAGES = {"train": ("train",), "score": ("metric",), "fid": ("fid",), "traverse": ("viz",), "sweep": None}


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(seeds=args.seed, betas=args.beta, out=args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fid" and args.real and args.generated:
            print(f"{fid_from_activation_files(args.real, args.generated):.6f}")
            return EXIT_OK
        config = _config(args)
        if args.command != "export":
            load_data(config)  # surfaces unreadable dataset paths as configuration errors
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "config":
        print(format_config(config))
        return EXIT_OK
    if args.command == "export":
        ws = Workspace(config)
        records = load_records(ws.records, None if args.all_configs else ws.hash)
        if not records:
            print(f"error: no records under {ws.records}", file=sys.stderr)
            return EXIT_CONFIG
        path = export_records(records, ws.root / f"records.{args.format}", args.format)
        print(f"wrote {path}")
        print(format_summary(summary_table(records, args.metric),
                             scale=100.0 if args.metric == "accuracy" else 1.0))
        return EXIT_OK

    records = run(config, resume=args.resume, stages=STAGES[args.command], log=print)
    bad = [r for r in records if r.status != "ok"]
    for r in bad:
        print(f"seed {r.seed} beta {r.beta:g}: {r.status}: {r.error.splitlines()[0] if r.error else ''}",
              file=sys.stderr)
    return EXIT_PARTIAL if bad else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
