"""CLI: `dlpredictor train` / `dlpredictor predict` over tipcast file
contracts.  Exit codes: 0 ok, 1 runtime error, 2 usage."""

from __future__ import annotations

import argparse
import sys

from .data import CorpusFormatError
from .model import NetworkSpec, TrainConfig
from .predict import predict_file
from .train import train


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dlpredictor",
        description="CNN-LSTM tipping-point regressor over instance files")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train an ensemble on an instance file")
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--variant", choices=["dl", "null"], default="dl")
    t.add_argument("--epochs", type=int, default=200,
                   help="fixed epoch count (desk-scale override; recorded)")
    t.add_argument("--ensemble", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--lr", type=float, default=None,
                   help="learning-rate override of the variant's published "
                        "value (desk-scale; recorded in metrics.json)")
    t.add_argument("--log-every", type=int, default=0)

    p = sub.add_parser("predict", help="ensemble predictions for instances")
    p.add_argument("--models", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            spec = NetworkSpec.for_variant(args.variant)
            if args.lr is not None:
                import dataclasses
                spec = dataclasses.replace(spec, lr=args.lr)
            cfg = TrainConfig(epochs=args.epochs, ensemble=args.ensemble,
                              seed=args.seed, batch_size=args.batch_size,
                              variant=args.variant)
            metrics = train(args.corpus, args.out, spec=spec, cfg=cfg,
                            log_every=args.log_every)
            print(f"trained {cfg.ensemble} networks; ensemble val MSE "
                  f"{metrics['ensemble_val_mse']:.4f}")
        else:
            preds = predict_file(args.models, args.instances, args.out)
            print(f"wrote {len(preds)} predictions to {args.out}")
        return 0
    except (CorpusFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
