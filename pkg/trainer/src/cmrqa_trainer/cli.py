"""Train and export one ensemble member per invocation.

The six members are independent; train them as six processes if wanted.
Progress (per-epoch loss, export parity) goes to stderr via logging;
the final line on stdout is a one-line JSON summary.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ARCHITECTURES, REPRESENTATIONS, TrainConfig, VARIANTS
from .errors import TrainerError
from .train import finetune

_LOG_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmrqa-train",
        description="Fine-tune one (architecture, representation) patch classifier "
        "on cmrqa balance/sample artifacts and export it for the scoring engine.",
    )
    parser.add_argument("--arch", required=True, choices=ARCHITECTURES)
    parser.add_argument("--representation", required=True, choices=REPRESENTATIONS)
    parser.add_argument("--manifest", required=True, help="batches.json from `cmrqa balance`")
    parser.add_argument(
        "--patches", required=True, help="directory tree of `cmrqa sample --png` dumps"
    )
    parser.add_argument("--out", required=True, help="model file to write")
    parser.add_argument(
        "--variant", help=f"backbone variant (default: smallest of the family; {VARIANTS})"
    )
    parser.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    parser.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)
    parser.add_argument("--dropout", type=float, default=TrainConfig.dropout)
    parser.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    parser.add_argument("--seed", type=int, default=TrainConfig.seed)
    parser.add_argument(
        "--no-pretrained",
        action="store_true",
        help="start from randomly initialized backbone weights",
    )
    return parser


def main(argv=None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("CMRQA_LOG", "").strip().lower(), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = TrainConfig(
            architecture=args.arch,
            representation=args.representation,
            manifest_path=args.manifest,
            patch_root=args.patches,
            export_path=args.out,
            variant=args.variant,
            learning_rate=args.learning_rate,
            epochs=args.epochs,
            dropout=args.dropout,
            batch_size=args.batch_size,
            seed=args.seed,
            pretrained=not args.no_pretrained,
        )
        result = finetune(cfg)
    except FileNotFoundError as exc:
        print(json.dumps({"error": "FileNotFoundError", "message": str(exc)}), file=sys.stderr)
        return 4
    except TrainerError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 3
    print(
        json.dumps(
            {
                "model": str(result.export_path),
                "metadata": str(result.metadata_path),
                "first_epoch_loss": result.epoch_losses[0],
                "final_epoch_loss": result.epoch_losses[-1],
                "trainable_params": result.trainable_params,
                "total_params": result.total_params,
                "parity": result.parity,
            },
            sort_keys=True,
        )
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
