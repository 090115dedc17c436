#!/usr/bin/env python3
"""Run the centering study: 20 damped trials plus an undamped comparison arm.

Writes two run directories (damped/, undamped/) with trial CSVs, reports,
aggregates, and response plots, then prints the overshoot comparison.
"""

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from lumen_servo.config import ExperimentConfig, load_config
from lumen_servo.harness import emit_plots, run_centering, save_run


def run_arm(cfg, outdir):
    results, reports, agg = run_centering(cfg)
    save_run(outdir, cfg, results, reports, agg)
    emit_plots(results, outdir, "centering")
    os_vals = [max(rep.os_x, rep.os_y) for rep in reports if rep is not None]
    done = sum(r.completed for r in results)
    print(f"{outdir}: {done}/{len(results)} completed, "
          f"mean overshoot {np.mean(os_vals):.2f}%")
    return results, reports


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="optional YAML config")
    ap.add_argument("--out", default="out/centering_study")
    ap.add_argument("--trials", type=int, default=20)
    args = ap.parse_args()

    base = load_config(args.config) if args.config else ExperimentConfig()
    base = dataclasses.replace(base, experiment="centering",
                               n_trials=args.trials)
    out = Path(args.out)
    run_arm(base, out / "damped")
    undamped = dataclasses.replace(
        base, control=dataclasses.replace(base.control, damping=0.0))
    run_arm(undamped, out / "undamped")


if __name__ == "__main__":
    main()
