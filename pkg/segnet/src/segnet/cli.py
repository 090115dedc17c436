"""Command line entry point: train, serve, eval."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, DatasetTooSmall
from .model import NetConfig
from .train import (TrainConfig, evaluate, load_checkpoint, load_dataset,
                    save_checkpoint, train)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="segnet",
                                description="Dual-branch lumen segmentation "
                                            "network: training, evaluation, "
                                            "and mask serving")
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train on a simulator dataset")
    tr.add_argument("--data", required=True, help="dataset directory")
    tr.add_argument("--out", required=True, help="checkpoint output path")
    tr.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    tr.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    tr.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    tr.add_argument("--seed", type=int, default=TrainConfig.rng_seed)

    sv = sub.add_parser("serve", help="serve masks over the wire protocol")
    sv.add_argument("--ckpt", required=True)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=7070)

    ev = sub.add_parser("eval", help="report DSC on a dataset")
    ev.add_argument("--data", required=True)
    ev.add_argument("--ckpt", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "train":
            cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                              learning_rate=args.lr, rng_seed=args.seed)

            def progress(epoch, loss):
                print(f"epoch {epoch:3d}: loss {loss:.4f}")

            model, metrics = train(args.data, NetConfig(), cfg, progress)
            save_checkpoint(args.out, model, metrics)
            if "median_dsc" in metrics:
                print(f"validation median DSC {metrics['median_dsc']:.4f} "
                      f"over {metrics['n']} samples")
            print(f"checkpoint written to {args.out}")
            return 0
        if args.command == "serve":
            from .server import serve
            serve(load_checkpoint(args.ckpt), args.host, args.port)
            return 0
        if args.command == "eval":
            model = load_checkpoint(args.ckpt)
            metrics = evaluate(model, load_dataset(args.data))
            print(json.dumps(metrics, indent=2))
            return 0
        raise AssertionError(f"unhandled command {args.command!r}")
    except (ConfigError, DatasetTooSmall) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
