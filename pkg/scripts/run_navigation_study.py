#!/usr/bin/env python3
"""Run seeded navigation trials across all four tube paths and print the
aggregate tracking/smoothness table."""

import argparse
import dataclasses
from pathlib import Path

from lumen_servo.config import ExperimentConfig, load_config
from lumen_servo.harness import emit_plots, run_navigation, save_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="optional YAML config")
    ap.add_argument("--out", default="out/navigation_study")
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--paths", default="ABCD")
    args = ap.parse_args()

    base = load_config(args.config) if args.config else ExperimentConfig()
    rows = []
    for path_id in args.paths:
        cfg = dataclasses.replace(base, experiment="navigation",
                                  path_id=path_id, n_trials=args.trials)
        results, reports, agg = run_navigation(cfg)
        outdir = Path(args.out) / f"path_{path_id}"
        save_run(outdir, cfg, results, reports, agg)
        emit_plots(results, outdir, "navigation")
        rows.extend(agg)
        done = sum(r.completed for r in results)
        print(f"path {path_id}: {done}/{len(results)} completed")

    print(f"\n{'path':<5}{'metric':<8}{'mean':>10}{'std':>10}{'n':>4}")
    for r in rows:
        print(f"{r['path']:<5}{r['metric']:<8}{r['mean']:>10.3f}"
              f"{r['std']:>10.3f}{r['n']:>4}")


if __name__ == "__main__":
    main()
