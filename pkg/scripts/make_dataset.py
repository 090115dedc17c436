#!/usr/bin/env python3
"""Render a segmentation dataset (frame triplets + ground-truth masks) from
poses sampled along all four tube paths."""

import argparse
import dataclasses

from lumen_servo.config import ExperimentConfig, load_config
from lumen_servo.harness import generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="optional YAML config")
    ap.add_argument("--out", default="out/dataset")
    ap.add_argument("--count", type=int, default=2000)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = dict(experiment="dataset", dataset_count=args.count,
                     dataset_image_size=args.size)
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    cfg = dataclasses.replace(cfg, **overrides)
    index = generate_dataset(cfg, args.out)
    print(f"{index['count']} samples written to {args.out}")


if __name__ == "__main__":
    main()
