"""Command-line entry point ``dgnflow``.

Commands::

    dgnflow run --config FILE [--output DIR] [--repeats N]
    dgnflow sweep --config FILE [--k K ...] [--norm NORM ...] [--groups G ...]
                  [--lambdas L ...] [--tune-lambda] [--missing-features]
                  [--jobs N] [--deep] [--output DIR]
    dgnflow export --config FILE [--output DIR]
    dgnflow versions

Exit codes: 0 success, 1 configuration error, 2 data error, 3 every repeat
of an experiment failed.
"""

import argparse
import logging
import sys
from dataclasses import replace

from dgnflow.errors import AllRepeatsFailedError, ConfigError, FormatError, ParameterError
from dgnflow.experiment import (
    ExperimentConfig,
    export_embeddings,
    load_dataset,
    run_experiment,
    sweep,
)
from dgnflow.layers.normalization import NORMALIZERS
from dgnflow.training import train
from dgnflow.version import __version__, show_versions

logger = logging.getLogger(__name__)

__all__ = ["default_depths", "main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_FAILED = 3

DEPTHS = {
    "gcn": [*range(1, 11), 15, 20, 25, 30],
    "gat": [*range(1, 11), 15, 20, 25, 30],
    "sgc": [1, 5, 10, 20, 30],
}
DEEP_DEPTHS = {
    "gcn": [*range(1, 11), 15, 20, 25, 30, 60, 90, 120],
    "gat": [*range(1, 11), 15, 20, 25, 30, 60, 90, 120],
    "sgc": [1, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120],
}


def default_depths(kind, deep=False):
    """Depth grid swept for a model kind."""
    return list((DEEP_DEPTHS if deep else DEPTHS)[kind])


def _parser():
    parser = argparse.ArgumentParser(
        prog="dgnflow",
        description="Train deep graph neural networks with group normalization "
        "and measure over-smoothing.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug output")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="train and evaluate one configuration")
    run.add_argument("--config", required=True, help="experiment JSON file")
    run.add_argument("--output", help="output directory")
    run.add_argument("--repeats", type=int, help="number of seeds")

    sw = commands.add_parser("sweep", help="sweep depths and normalizers")
    sw.add_argument("--config", required=True, help="experiment JSON file")
    sw.add_argument("--k", type=int, nargs="+", help="depths")
    sw.add_argument("--norm", nargs="+", choices=NORMALIZERS, help="normalizers")
    sw.add_argument("--groups", type=int, nargs="+", help="DGN group counts")
    sw.add_argument("--lambdas", type=float, nargs="+", help="DGN balancing factors")
    sw.add_argument(
        "--tune-lambda", action="store_true", help="tune lambda on validation accuracy"
    )
    sw.add_argument(
        "--missing-features",
        action="store_true",
        help="zero the features of validation and test nodes",
    )
    sw.add_argument("--jobs", type=int, default=1, help="worker threads")
    sw.add_argument("--deep", action="store_true", help="sweep depths up to 120")
    sw.add_argument("--output", help="output directory")

    ex = commands.add_parser("export", help="export embeddings and DGN groups")
    ex.add_argument("--config", required=True, help="experiment JSON file")
    ex.add_argument("--output", help="output directory")

    commands.add_parser("versions", help="print dependency versions")
    return parser


def _load_config(args):
    try:
        cfg = ExperimentConfig.from_json(args.config)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    if getattr(args, "output", None):
        cfg = replace(cfg, output_dir=args.output)
    return cfg


def _run(args):
    cfg = _load_config(args)
    if args.repeats is not None:
        cfg = replace(cfg, repeats=args.repeats, seeds=None)
    record = run_experiment(cfg)
    print(
        f"{record.model} K={record.depth} norm={record.norm}: "
        f"accuracy {record.acc_mean:.4f} +/- {record.acc_std:.4f}, "
        f"g_ins {record.g_ins:.4f}, r_group {record.r_group:.4f}"
    )


def _sweep(args):
    cfg = _load_config(args)
    if args.missing_features:
        cfg = replace(cfg, scenario="missing_features")
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be at least 1, got {args.jobs}")
    k_list = args.k or default_depths(cfg.model.kind, args.deep)
    norm_list = args.norm or list(NORMALIZERS)
    result = sweep(
        cfg,
        k_list,
        norm_list,
        group_list=args.groups,
        lambda_list=args.lambdas,
        jobs=args.jobs,
        tune=args.tune_lambda,
        show_progress=not args.quiet,
    )
    if result.curves.empty:
        raise AllRepeatsFailedError("every sweep cell failed")
    print(result.best.to_string(index=False))
    if result.failures:
        logger.warning("%d sweep cells failed", len(result.failures))


def _export(args):
    cfg = _load_config(args)
    g = load_dataset(cfg)
    result = train(cfg.model, replace(cfg.train, seed=cfg.seed_list[0]), g)
    export_embeddings(result.model, g, cfg.output_dir, result.inputs)
    print(f"embeddings written to {cfg.output_dir}")


COMMANDS = {"run": _run, "sweep": _sweep, "export": _export}


def main(argv=None):
    """Run the command line and return the exit code."""
    args = _parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "versions":
        show_versions()
        return EXIT_OK
    try:
        COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except (FormatError, ParameterError, OSError) as e:
        logger.error("data error: %s", e)
        return EXIT_DATA
    except AllRepeatsFailedError as e:
        logger.error("%s", e)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
