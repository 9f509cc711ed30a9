"""Command line entry point: ``cgrs {ingest,index,run,report}``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 run failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .corpus import load_dataset, save_profiles
from .errors import ConfigError, ParseError, RunFailure
from .stats import build_index, load_index, save_index

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_RUN = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="ratings file (u.data, ratings.csv) or profile cache")
    p.add_argument("--format", choices=["tab_data", "csv_ratings", "profiles"])
    p.add_argument("--min-profile", type=int)
    p.add_argument("--train-fraction", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cgrs", description="Conformal group recommendation experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse ratings and write a profile cache")
    _dataset_flags(p)
    p.add_argument("--out", required=True, help="profile cache path")

    p = sub.add_parser("index", help="build and store the item statistics index")
    _dataset_flags(p)
    p.add_argument("--no-precedence", action="store_true")
    p.add_argument("--out", required=True, help="index cache path (.npz)")

    p = sub.add_parser("run", help="run an experiment and write reports")
    _dataset_flags(p)
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--setting", choices=bench.SETTINGS)
    p.add_argument("--group-size", help="size list, e.g. 2 or 2,3 or 2-6")
    p.add_argument("--instances", type=int)
    p.add_argument("--epsilon", help="comma-separated significance levels")
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--topk", help="K values, e.g. 1-20 or 5,10")
    p.add_argument("--model", choices=["am", "pm"])
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", help="re-emit CSV reports from a stored artifact")
    p.add_argument("--artifact", required=True, help="artifact.json or the run directory holding it")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _load(args):
    if not args.dataset:
        raise ConfigError("--dataset is required")
    return load_dataset(args.dataset, args.format or "tab_data", args.min_profile or 20, args.train_fraction or 0.6)


def _cmd_ingest(args) -> None:
    ds = _load(args)
    save_profiles(ds, args.out)
    print(f"{args.out}: {ds.n_users} users, {ds.n_items} items")


def _cmd_index(args) -> None:
    ds = _load(args)
    digest = ds.content_hash()
    out = Path(args.out)
    if out.exists() and load_index(out, digest) is not None:
        print(f"{out}: cache is current")
        return
    idx = build_index(ds, with_precedence=not args.no_precedence)
    save_index(idx, out, digest)
    print(f"{out}: {idx.n_items} items, {idx.co_support.nnz} co-support entries")


def _cmd_run(args) -> None:
    overrides = dict(
        dataset=args.dataset, format=args.format, min_profile=args.min_profile,
        train_fraction=args.train_fraction, setting=args.setting, group_sizes=args.group_size,
        n_instances=args.instances, epsilons=args.epsilon, tau=args.tau, seed=args.seed,
        topk=args.topk, model=args.model, jobs=args.jobs,
    )
    if args.config:
        cfg = bench.ExperimentConfig.from_file(args.config, **overrides)
    else:
        cfg = bench.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    if not cfg.dataset:
        raise ConfigError("no dataset given")
    art = bench.run_experiment(cfg)
    for path in bench.emit_reports(art, args.out):
        print(path)


def _cmd_report(args) -> None:
    art = bench.load_artifact(args.artifact)
    for path in bench.emit_reports(art, args.out):
        print(path)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        {"ingest": _cmd_ingest, "index": _cmd_index, "run": _cmd_run, "report": _cmd_report}[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RunFailure as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
