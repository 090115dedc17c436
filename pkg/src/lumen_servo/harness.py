"""Experiment drivers: seeded runs, CSV/JSON artifacts, datasets, plots."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _geom, metrics, perception, plant, world
from .config import ExperimentConfig
from .errors import IoError
from .metrics import (CenteringReport, NavigationReport, TrialLog,
                      centering_metrics, nav_errors, ntr, peak_count, sparc,
                      tip_speed, ldj)
from .sim import TrialResult, TrialRunner, rotation_to_z

CSV_COLUMNS = ("t,q1,q2,q3,px,py,phat_x,phat_y,rho,"
               "tip_x,tip_y,tip_z,vx,vy,mode,clearance")


def _fmt(x: float) -> str:
    """Shortest decimal that round-trips, so stored logs replay exactly."""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def write_trial_csv(path, log: TrialLog) -> None:
    lines = [CSV_COLUMNS]
    for i in range(len(log)):
        vals = [log.t[i], *log.q[i], *log.p[i], *log.p_hat[i], log.rho[i],
                *log.tip[i], *log.v[i]]
        mode = log.mode[i]
        mode = mode.name.lower() if hasattr(mode, "name") else str(mode)
        lines.append(",".join(_fmt(float(v)) for v in vals)
                     + f",{mode},{_fmt(float(log.clearance[i]))}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trial_csv(path, path_id: str) -> TrialLog:
    """Rebuild a TrialLog from a trajectory CSV (modes kept as strings)."""
    lines = Path(path).read_text().strip().split("\n")
    if lines[0] != CSV_COLUMNS:
        raise IoError(f"unexpected CSV header in {path}")
    rows = [ln.split(",") for ln in lines[1:]]
    num = np.array([[float(v) for v in r[:14]] + [float(r[15])] for r in rows])
    t = num[:, 0]
    dt = float(t[1] - t[0]) if len(t) > 1 else 0.1
    return TrialLog(t=t, q=num[:, 1:4], q_dot=np.zeros((len(t), 3)),
                    tip=num[:, 9:12], p=num[:, 4:6], p_hat=num[:, 6:8],
                    rho=num[:, 8], v=num[:, 12:14],
                    mode=[r[14] for r in rows], clearance=num[:, 14],
                    dt=dt, path_id=path_id)


# -- experiments -------------------------------------------------------------


def _aggregate(path_id: str, rows: list[dict]) -> list[dict]:
    """Table rows (path, metric, mean, std, n) over completed trials."""
    out = []
    keys = rows[0].keys() if rows else []
    for key in keys:
        vals = [r[key] for r in rows if r[key] is not None
                and not (isinstance(r[key], float) and math.isnan(r[key]))]
        vals = [v for v in vals if not isinstance(v, bool)]
        if not vals:
            continue
        arr = np.asarray(vals, dtype=float)
        out.append({"path": path_id, "metric": key,
                    "mean": float(arr.mean()), "std": float(arr.std()),
                    "n": int(arr.size)})
    return out


def centering_report(log: TrialLog, center=None) -> CenteringReport:
    series = ntr(log) if center is None else ntr(log, center)
    return centering_metrics(series)


def navigation_report(cfg: ExperimentConfig, log: TrialLog) -> NavigationReport:
    path = world.build_path(log.path_id)
    ct, mae, max_ae = nav_errors(log, path)
    speed = tip_speed(log)
    _, s0 = _geom.dist_to_centerline(path.segments, *log.tip[0])
    _, s1 = _geom.dist_to_centerline(path.segments, *log.tip[-1])
    travelled = max(float(s1 - s0), 1e-9)
    return NavigationReport(
        ct=ct, mae=mae, max_ae=max_ae,
        ldj=ldj(speed, log.dt),
        sparc=sparc(speed, log.dt, cfg.spectral),
        np=peak_count(speed, travelled, cfg.spectral.amp_threshold),
        collided=log.collided)


def run_centering(cfg: ExperimentConfig, backend=None):
    """Seeded centering trials; returns (results, reports, aggregate rows)."""
    runner = TrialRunner(cfg, backend)
    results, reports, rows = [], [], []
    for trial in range(cfg.n_trials):
        res = runner.run_centering(trial)
        rep = None
        if res.completed:
            rep = centering_report(res.log, np.asarray(cfg.perception.camera.center))
            rows.append({"sse": rep.sse, "rt": rep.rt, "st": rep.st,
                         "os_x": rep.os_x, "os_y": rep.os_y})
        results.append(res)
        reports.append(rep)
    return results, reports, _aggregate(cfg.path_id, rows)


def run_navigation(cfg: ExperimentConfig, backend=None):
    runner = TrialRunner(cfg, backend)
    results, reports, rows = [], [], []
    for trial in range(cfg.n_trials):
        res = runner.run_navigation(trial)
        rep = None
        if res.completed:
            rep = navigation_report(cfg, res.log)
            rows.append({"ct": rep.ct, "mae": rep.mae, "max_ae": rep.max_ae,
                         "ldj": rep.ldj, "sparc": rep.sparc, "np": rep.np})
        results.append(res)
        reports.append(rep)
    return results, reports, _aggregate(cfg.path_id, rows)


# -- artifacts ---------------------------------------------------------------


def _report_dict(res: TrialResult, rep) -> dict:
    d = {"trial_id": res.trial_id, "status": res.status, "reason": res.reason,
         "collided": bool(res.log.collided)}
    if rep is not None:
        for k, v in vars(rep).items():
            d[k] = (None if v is None
                    else bool(v) if isinstance(v, (bool, np.bool_))
                    else float(v))
    return d


def save_run(outdir, cfg: ExperimentConfig, results, reports, aggregate) -> None:
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for res in results:
            write_trial_csv(out / f"trial_{res.trial_id:03d}.csv", res.log)
        payload = [_report_dict(res, rep) for res, rep in zip(results, reports)]
        (out / "reports.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")
        lines = ["path,metric,mean,std,n"]
        for row in aggregate:
            lines.append(f"{row['path']},{row['metric']},{_fmt(row['mean'])},"
                         f"{_fmt(row['std'])},{row['n']}")
        (out / "aggregate.csv").write_text("\n".join(lines) + "\n")
        meta = {"experiment": cfg.experiment, "path_id": cfg.path_id,
                "n_trials": cfg.n_trials, "rng_seed": cfg.rng_seed,
                "dt": cfg.control.dt,
                "image_center": list(cfg.perception.camera.center)}
        (out / "run_meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write run artifacts to {outdir}: {exc}") from exc


def recompute_reports(indir) -> list[dict]:
    """Re-derive reports.json and aggregate.csv from the stored trial CSVs."""
    src = Path(indir)
    meta_file = src / "run_meta.json"
    reports_file = src / "reports.json"
    if not meta_file.is_file() or not reports_file.is_file():
        raise IoError(f"{indir} is not a run directory")
    meta = json.loads(meta_file.read_text())
    prior = {r["trial_id"]: r for r in json.loads(reports_file.read_text())}
    cfg = ExperimentConfig(experiment=meta["experiment"],
                           path_id=meta["path_id"],
                           n_trials=meta["n_trials"],
                           rng_seed=meta["rng_seed"])
    center = np.asarray(meta["image_center"])
    payload, rows = [], []
    for csv_file in sorted(src.glob("trial_*.csv")):
        trial_id = int(csv_file.stem.split("_")[1])
        log = read_trial_csv(csv_file, meta["path_id"])
        old = prior.get(trial_id, {"status": "Completed", "reason": ""})
        entry = {"trial_id": trial_id, "status": old["status"],
                 "reason": old["reason"], "collided": bool(log.collided)}
        if old["status"] == "Completed":
            if meta["experiment"] == "centering":
                rep = centering_report(log, center)
                rows.append({"sse": rep.sse, "rt": rep.rt, "st": rep.st,
                             "os_x": rep.os_x, "os_y": rep.os_y})
            else:
                rep = navigation_report(cfg, log)
                rows.append({"ct": rep.ct, "mae": rep.mae,
                             "max_ae": rep.max_ae, "ldj": rep.ldj,
                             "sparc": rep.sparc, "np": rep.np})
            for k, v in vars(rep).items():
                entry[k] = (None if v is None
                            else bool(v) if isinstance(v, (bool, np.bool_))
                            else float(v))
        payload.append(entry)
    try:
        reports_file.write_text(json.dumps(payload, indent=2, sort_keys=True)
                                + "\n")
        lines = ["path,metric,mean,std,n"]
        for row in _aggregate(meta["path_id"], rows):
            lines.append(f"{row['path']},{row['metric']},{_fmt(row['mean'])},"
                         f"{_fmt(row['std'])},{row['n']}")
        (src / "aggregate.csv").write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot rewrite reports in {indir}: {exc}") from exc
    return payload


# -- dataset generation ------------------------------------------------------

_DATASET_PATHS = ("A", "B", "C", "D")
_FRAME_SPACING = 1.5     # mm of insertion between consecutive frames


def _dataset_pose(path, s, rad, ang, tilt, azim):
    """Camera pose at arc-length s with a lateral offset and tilt expressed
    in the local centerline frame, so a frame triple shares one pose shape."""
    point, tangent = path.point_tangent(s)
    rot = rotation_to_z(tangent)
    offset = rot @ np.array([rad * math.cos(ang), rad * math.sin(ang), 0.0])
    axis = rot @ np.array([-math.sin(azim), math.cos(azim), 0.0])
    tilt_rot = plant._rot_from_axis_angle(axis, tilt)
    return plant.TipPose(position=point + offset, orientation=tilt_rot @ rot,
                         config=(tilt, azim))


def generate_dataset(cfg: ExperimentConfig, outdir) -> dict:
    """Render (3 frames, mask) training samples along all built-in paths."""
    out = Path(outdir)
    n = cfg.dataset_count
    size = cfg.dataset_image_size
    cam = perception.CameraModel(size, size, cfg.perception.camera.horizontal_fov)
    index = {"count": n, "image_size": size, "rng_seed": cfg.rng_seed,
             "samples": []}
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i in range(n):
            rng = np.random.default_rng(
                np.random.SeedSequence(cfg.rng_seed, spawn_key=(2, i)))
            path_id = _DATASET_PATHS[i % len(_DATASET_PATHS)]
            path = world.build_path(path_id)
            phantom = world.TubePhantom(path, inner_radius=cfg.inner_radius)
            for _ in range(50):
                s = rng.uniform(5.0, path.total_arc_length - 40.0)
                rad = rng.uniform(0.0, 2.0)
                ang = rng.uniform(0.0, 2.0 * math.pi)
                tilt = rng.uniform(0.0, 0.2)
                azim = rng.uniform(0.0, 2.0 * math.pi)
                pose = _dataset_pose(path, s, rad, ang, tilt, azim)
                if world.wall_clearance(phantom, pose.position) > 0.5:
                    break
            else:
                raise IoError("could not sample an in-lumen dataset pose")
            frames = []
            for k in (2, 1, 0):
                pk = _dataset_pose(path, s - k * _FRAME_SPACING,
                                   rad, ang, tilt, azim)
                frame, mask = perception.render_lumen(
                    phantom, pk, cam, d_lumen=cfg.perception.d_lumen)
                frames.append((frame, mask))
            files = []
            for k, (frame, _) in enumerate(frames):
                name = f"sample_{i:05d}_f{k}.pgm"
                perception.write_pgm(out / name, frame)
                files.append(name)
            mask_name = f"sample_{i:05d}_mask.pgm"
            perception.write_pgm(out / mask_name,
                                 (frames[-1][1].pixels * 255).astype(np.uint8))
            index["samples"].append({
                "id": i, "path": path_id, "s": round(float(s), 6),
                "frames": files, "mask": mask_name})
        (out / "index.json").write_text(
            json.dumps(index, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write dataset to {outdir}: {exc}") from exc
    return index


# -- plots -------------------------------------------------------------------


def emit_plots(results, outdir, experiment: str) -> list:
    """SVG per trial: NTR response (centering) or path + depth error (nav)."""
    if not results:
        raise IoError("no results to plot")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for res in results:
        log = res.log
        fname = out / f"trial_{res.trial_id:03d}.svg"
        if experiment == "centering":
            series = ntr(log)
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.plot(series.t, series.pxn, label="x response")
            ax.plot(series.t, series.pyn, label="y response")
            ax.plot(series.t, series.rhon, label="radial response")
            ax.axhline(1.0, color="k", lw=0.8)
            ax.axhline(0.9, color="k", lw=0.5, ls="--")
            ax.axhline(1.1, color="k", lw=0.5, ls="--")
            ax.set_xlabel("time [s]")
            ax.set_ylabel("normalized response")
            ax.legend()
        else:
            path = world.build_path(log.path_id)
            s_grid = np.linspace(0.0, path.total_arc_length, 400)
            pts = np.array([path.point_tangent(s)[0] for s in s_grid])
            fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
            ax1.plot(pts[:, 2], pts[:, 0], "k--", label="centerline")
            ax1.plot(log.tip[:, 2], log.tip[:, 0], label="tip")
            ax1.set_xlabel("z [mm]")
            ax1.set_ylabel("x [mm]")
            ax1.legend()
            errs = metrics.depth_error_series(log, path)
            a0, u0 = path.point_tangent(0.0)
            depth = (log.tip - a0) @ u0
            max_depth = float((pts[-1] - a0) @ u0)
            keep = (depth >= 0.0) & (depth <= max_depth)
            ax2.plot(depth[keep], errs)
            ax2.set_xlabel("axial depth [mm]")
            ax2.set_ylabel("|e_z| [mm]")
        fig.tight_layout()
        fig.savefig(fname)
        plt.close(fig)
        written.append(fname)
    return written
