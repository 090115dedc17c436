"""Command line entry point for experiments, datasets, and report rebuilds."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import harness, perception
from .config import ExperimentConfig, load_config
from .errors import ConfigError, IoError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORTED = 3
EXIT_IO = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lumen-servo",
                                description="Lumen-following visual servo "
                                            "simulator and experiment runner")
    sub = p.add_subparsers(dest="command", required=True)

    run_c = sub.add_parser("centering", help="run seeded centering trials")
    run_n = sub.add_parser("navigate", help="run seeded navigation trials")
    ds = sub.add_parser("dataset", help="render a segmentation dataset")
    rep = sub.add_parser("report", help="recompute metrics from stored CSVs")

    for cmd in (run_c, run_n, ds):
        cmd.add_argument("--config", required=True, help="YAML config file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config RNG seed")
        cmd.add_argument("--out", default=None,
                         help="override the config output directory")
    run_n.add_argument("--path", required=True, choices=list("ABCD"),
                       help="tube path to navigate")
    ds.add_argument("--count", type=int, default=None,
                    help="override the number of samples")
    rep.add_argument("--in", dest="indir", required=True,
                     help="run directory with trial CSVs and run_meta.json")
    return p


def _load(args, **overrides) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _backend(cfg: ExperimentConfig):
    if cfg.backend.kind == "remote":
        return perception.RemoteBackend(cfg.backend.host, cfg.backend.port)
    return None


def _run_experiment(cfg: ExperimentConfig, experiment: str) -> int:
    runner = (harness.run_centering if experiment == "centering"
              else harness.run_navigation)
    backend = _backend(cfg)
    try:
        results, reports, aggregate = runner(cfg, backend)
    finally:
        if backend is not None:
            backend.close()
    harness.save_run(cfg.output_dir, cfg, results, reports, aggregate)
    harness.emit_plots(results, cfg.output_dir, experiment)
    for res in results:
        suffix = f" ({res.reason})" if res.reason else ""
        print(f"trial {res.trial_id:3d}: {res.status}{suffix}")
    n_done = sum(r.completed for r in results)
    print(f"{n_done}/{len(results)} trials completed; "
          f"artifacts in {cfg.output_dir}")
    return EXIT_OK if n_done == len(results) else EXIT_ABORTED


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "centering":
            cfg = _load(args, experiment="centering")
            return _run_experiment(cfg, "centering")
        if args.command == "navigate":
            cfg = _load(args, experiment="navigation", path_id=args.path)
            return _run_experiment(cfg, "navigation")
        if args.command == "dataset":
            overrides = {"experiment": "dataset"}
            if args.count is not None:
                overrides["dataset_count"] = args.count
            cfg = _load(args, **overrides)
            index = harness.generate_dataset(cfg, cfg.output_dir)
            print(f"{index['count']} samples written to {cfg.output_dir}")
            return EXIT_OK
        if args.command == "report":
            payload = harness.recompute_reports(args.indir)
            for entry in payload:
                keys = [k for k in ("sse", "rt", "st", "os_x", "os_y", "ct",
                                    "mae", "max_ae", "ldj", "sparc", "np")
                        if k in entry]
                summary = ", ".join(
                    f"{k}={entry[k]:.4g}" for k in keys
                    if entry[k] is not None)
                print(f"trial {entry['trial_id']:3d}: {entry['status']}"
                      + (f"  {summary}" if summary else ""))
            print(f"reports rebuilt in {args.indir}")
            return EXIT_OK
        raise AssertionError(f"unhandled command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IoError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
