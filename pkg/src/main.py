#!/usr/bin/env python3
"""
STS-GCN pose forecaster - command-line entry point.

    python src/main.py synth         --config configs/synthetic.json
    python src/main.py train         --config configs/synthetic.json [--seed N] [--variant V] [--epochs N]
    python src/main.py eval          --config configs/synthetic.json [--checkpoint PATH]
    python src/main.py predict       --config ... --sequence PATH [--checkpoint PATH] [--output PATH]
    python src/main.py export-graph  --config ... [--layer L] [--kind space|time] [--checkpoint PATH]
    python src/main.py count-params  --config configs/paper.json

Logs go to stderr (JSON unless LOG_FORMAT=console); command results go to stdout.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import structlog

import errors
from config import RunConfig
from metrics import ERRORS
from model.graph import KINDS
from model.variants import EncoderVariant
from runner import cmd_count_params, cmd_eval, cmd_export_graph, cmd_predict, cmd_synth, cmd_train

logger = structlog.get_logger()

# error type -> metrics component label
_COMPONENTS = {
    errors.ConfigError: "config",
    errors.CheckpointError: "model",
    errors.ExportError: "model",
    errors.ShapeError: "model",
    errors.TapeError: "model",
    errors.DivergenceError: "training",
    errors.OptimizerError: "training",
    errors.HorizonError: "evaluation",
    errors.RotationError: "evaluation",
}


def configure_logging(level: str = "INFO", fmt: str = "json") -> None:
    logging.basicConfig(stream=sys.stderr, level=level.upper(), format="%(message)s", force=True)
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer()
            if fmt == "json"
            else structlog.dev.ConsoleRenderer(),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def _component(exc: Exception) -> str:
    for error_type, component in _COMPONENTS.items():
        if isinstance(exc, error_type):
            return component
    return "data" if isinstance(exc, errors.STSError) else "cli"


# ------------------------------------------------------------------
# Argument parsing
# ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stsgcn", description="Space-time separable GCN pose forecaster")
    commands = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run config (JSON)")
    common.add_argument("--seed", type=int, help="overrides model, train and synth seeds")
    common.add_argument("--variant", choices=[v.value for v in EncoderVariant])
    common.add_argument("--epochs", type=int)
    common.add_argument("--out", help="run directory, overrides output.dir")

    commands.add_parser("synth", parents=[common], help="write the synthetic dataset")
    commands.add_parser("train", parents=[common], help="train and write checkpoint + report")
    commands.add_parser("count-params", parents=[common], help="print the parameter breakdown")

    evaluate = commands.add_parser("eval", parents=[common], help="score a checkpoint on the test split")
    evaluate.add_argument("--checkpoint", help="defaults to <out>/checkpoint.txt")

    predict = commands.add_parser("predict", parents=[common], help="forecast K frames after a sequence")
    predict.add_argument("--checkpoint")
    predict.add_argument("--sequence", required=True)
    predict.add_argument("--output", help="defaults to <out>/predictions/<name>_forecast.txt")

    export = commands.add_parser("export-graph", parents=[common], help="write learnt adjacency as CSV")
    export.add_argument("--checkpoint")
    export.add_argument("--layer", type=int, default=1)
    export.add_argument("--kind", choices=KINDS, default="space")
    return parser


def run(args: argparse.Namespace) -> None:
    config = RunConfig.from_file(args.config).with_overrides(
        seed=args.seed, variant=args.variant, epochs=args.epochs, out=args.out
    )

    if args.command == "synth":
        written = cmd_synth(config)
        for split, paths in written.items():
            print(f"{split}: {len(paths)} sequences in {config.synth_dir(split)}")
    elif args.command == "train":
        report = cmd_train(config)
        print(f"trained {len(report.epochs)} epochs, best epoch {report.best_epoch}, "
              f"checkpoint {config.run_dir / 'checkpoint.txt'}")
    elif args.command == "eval":
        print(cmd_eval(config, args.checkpoint).render_table(), end="")
    elif args.command == "predict":
        print(cmd_predict(config, args.checkpoint, args.sequence, args.output))
    elif args.command == "export-graph":
        for path in cmd_export_graph(config, args.checkpoint, args.layer, args.kind).values():
            print(path)
    elif args.command == "count-params":
        print(cmd_count_params(config), end="")


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging(os.getenv("LOG_LEVEL", "INFO"), os.getenv("LOG_FORMAT", "json"))
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except (errors.STSError, OSError) as exc:
        ERRORS.labels(component=_component(exc)).inc()
        logger.error("command_failed", command=args.command, error_type=type(exc).__name__, error=str(exc))
        return 1
    logger.info("command_completed", command=args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
