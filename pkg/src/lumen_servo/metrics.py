"""Evaluation metrics: normalized target response, centering and navigation
errors, and the smoothness suite (log-dimensionless jerk, spectral arc
length, velocity peak count)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .errors import DegenerateProfile, DegenerateStart, GoalNotReached
from .world import GoalPlane, LumenPath, default_goal_plane, goal_crossed


@dataclass
class TrialLog:
    """Fixed-rate time series of one trial."""

    t: np.ndarray                 # s, strictly increasing, constant step
    q: np.ndarray                 # (n, 3)
    q_dot: np.ndarray             # (n, 3) actual actuator velocities
    tip: np.ndarray               # (n, 3) mm
    p: np.ndarray                 # (n, 2) raw detected target, px (nan if lost)
    p_hat: np.ndarray             # (n, 2) filtered target, px (nan if lost)
    rho: np.ndarray               # px
    v: np.ndarray                 # (n, 2) task-space velocity px/s
    mode: list
    clearance: np.ndarray         # mm, distance to nearest wall
    dt: float
    path_id: str = "A"

    def __len__(self):
        return len(self.t)

    @property
    def collided(self) -> bool:
        return bool(np.any(self.clearance <= 0.0))


@dataclass
class NTRSeries:
    t: np.ndarray
    pxn: np.ndarray
    pyn: np.ndarray
    rhon: np.ndarray


@dataclass
class CenteringReport:
    sse: float
    rt: float | None
    st: float | None
    os_x: float
    os_y: float


@dataclass
class NavigationReport:
    ct: float
    mae: float
    max_ae: float
    ldj: float
    sparc: float
    np: float
    collided: bool


@dataclass(frozen=True)
class SpectralParams:
    omega_max: float = 20.0        # Hz-equivalent cutoff ceiling
    amp_threshold: float = 0.05    # normalized magnitude for adaptive cutoff
    zero_pad_factor: int = 4       # exponent added to ceil(log2 n)

    def __post_init__(self):
        if self.omega_max <= 0 or not (0.0 < self.amp_threshold < 1.0):
            raise ValueError("bad spectral parameters")


def ntr(log: TrialLog, center=(319.5, 239.5)) -> NTRSeries:
    """Normalized target response on center-relative coordinates.

    With x = p_hat - c the series are (x(t0) - x(ti)) / x(t0) per axis and
    (rho(t0) - rho(ti)) / rho(t0), so reaching the image center drives all
    three to the set point 1.0.
    """
    c = np.asarray(center, dtype=float)
    rel = log.p_hat - c
    x0, y0 = rel[0]
    rho = log.rho
    if min(abs(x0), abs(y0), abs(rho[0])) < 1e-9:
        raise DegenerateStart("initial center-relative coordinate is zero")
    return NTRSeries(
        t=log.t.copy(),
        pxn=(x0 - rel[:, 0]) / x0,
        pyn=(y0 - rel[:, 1]) / y0,
        rhon=(rho[0] - rho) / rho[0],
    )


def _first_crossing(t, series, threshold):
    """Interpolated time at which series first reaches >= threshold."""
    idx = np.nonzero(series >= threshold)[0]
    if idx.size == 0:
        return None
    i = int(idx[0])
    if i == 0:
        return float(t[0])
    frac = (threshold - series[i - 1]) / (series[i] - series[i - 1])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def centering_metrics(series: NTRSeries, band: float = 0.1) -> CenteringReport:
    """SSE / rise time (0.2 to 0.8) / settling time (last entry into the
    +-0.1 band) / per-axis overshoot beyond the set point."""
    if len(series.t) == 0:
        raise ValueError("empty series")
    rhon = series.rhon
    sse = abs(1.0 - rhon[-1]) * 100.0
    t02 = _first_crossing(series.t, rhon, 0.2)
    t08 = _first_crossing(series.t, rhon, 0.8)
    rt = (t08 - t02) if (t02 is not None and t08 is not None) else None

    inside = np.abs(rhon - 1.0) <= band
    if not inside[-1]:
        st = None
    else:
        outside = np.nonzero(~inside)[0]
        if outside.size == 0:
            st = float(series.t[0])
        else:
            i = int(outside[-1])
            lo, hi = rhon[i], rhon[i + 1]
            edge = 0.9 if lo < 0.9 else 1.1
            frac = (edge - lo) / (hi - lo)
            st = float(series.t[i] + frac * (series.t[i + 1] - series.t[i]))
    os_x = max(0.0, float(series.pxn.max()) - 1.0) * 100.0
    os_y = max(0.0, float(series.pyn.max()) - 1.0) * 100.0
    return CenteringReport(sse=sse, rt=rt, st=st, os_x=os_x, os_y=os_y)


def depth_error_series(log: TrialLog, path: LumenPath) -> np.ndarray:
    """|tip - centerline point at the same axial depth| for in-phantom samples."""
    a0, u0 = path.point_tangent(0.0)
    s_grid = np.linspace(0.0, path.total_arc_length, 4096)
    pts = np.array([path.point_tangent(s)[0] for s in s_grid])
    depth_grid = (pts - a0) @ u0
    tip_depth = (log.tip - a0) @ u0
    keep = (tip_depth >= 0.0) & (tip_depth <= depth_grid[-1])
    errs = []
    for depth, tip in zip(tip_depth[keep], log.tip[keep]):
        s = float(np.interp(depth, depth_grid, s_grid))
        p, _ = path.point_tangent(s)
        errs.append(float(np.linalg.norm(tip - p)))
    return np.asarray(errs)


def nav_errors(log: TrialLog, path: LumenPath,
               plane: GoalPlane | None = None) -> tuple[float, float, float]:
    """(completion time, MAE, MaxAE) for a trial that crossed the goal."""
    if plane is None:
        plane = default_goal_plane(path)
    crossed = [i for i in range(len(log)) if goal_crossed(plane, log.tip[i])]
    if not crossed:
        raise GoalNotReached("tip never crossed the goal plane")
    ct = float(log.t[crossed[0]] - log.t[0])
    errs = depth_error_series(log, path)
    return ct, float(errs.mean()), float(errs.max())


def ldj(speed, dt: float) -> float:
    """Log-dimensionless jerk of a speed profile.

    -ln( (T / v_p^2) * integral |d2v/dt2|^2 dt ), second derivative by
    central differences, integral by trapezoid.
    """
    v = np.asarray(speed, dtype=float)
    if v.size < 4:
        raise ValueError("need at least 4 samples")
    v_p = float(np.abs(v).max())
    if v_p == 0.0:
        raise DegenerateProfile("zero speed profile")
    acc = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dt * dt)
    integral = float(np.trapezoid(acc * acc, dx=dt))
    if integral == 0.0:
        raise DegenerateProfile("jerk identically zero")
    duration = dt * (v.size - 1)
    return -math.log(duration / (v_p * v_p) * integral)


def sparc(speed, dt: float, params: SpectralParams = SpectralParams()) -> float:
    """Spectral arc length of the normalized speed spectrum over [0, w_c]."""
    v = np.asarray(speed, dtype=float)
    if v.size < 8:
        raise ValueError("need at least 8 samples")
    fs = 1.0 / dt
    nfft = int(2 ** (math.ceil(math.log2(v.size)) + params.zero_pad_factor))
    mag = np.abs(np.fft.rfft(v, nfft))
    freqs = np.arange(mag.size) * (fs / nfft)
    if mag[0] == 0.0:
        raise DegenerateProfile("zero-mean profile has V(0) = 0")
    vhat = mag / mag[0]
    sel = freqs <= params.omega_max
    freqs, vhat = freqs[sel], vhat[sel]
    above = np.nonzero(vhat >= params.amp_threshold)[0]
    omega_c = min(params.omega_max, float(freqs[above[-1]])) if above.size else params.omega_max
    if omega_c <= 0.0:
        raise DegenerateProfile("empty frequency band")
    sel = freqs <= omega_c
    f_sel, v_sel = freqs[sel], vhat[sel]
    dv = np.gradient(v_sel, f_sel)
    integrand = np.sqrt((1.0 / omega_c) ** 2 + dv * dv)
    return -float(np.trapezoid(integrand, f_sel))


def peak_count(speed, path_length: float, prominence: float = 0.05) -> float:
    """Velocity peaks of prominence >= threshold (on the peak-normalized
    profile) per millimetre travelled."""
    if path_length <= 0:
        raise ValueError("path_length must be positive")
    v = np.asarray(speed, dtype=float)
    v_p = float(np.abs(v).max())
    if v_p == 0.0:
        return 0.0
    peaks, _ = find_peaks(v / v_p, prominence=prominence)
    return len(peaks) / path_length


def tip_speed(log: TrialLog) -> np.ndarray:
    """3-D tip speed from logged positions, central differences."""
    tip = log.tip
    n = len(tip)
    v = np.empty(n)
    v[1:-1] = np.linalg.norm(tip[2:] - tip[:-2], axis=1) / (2.0 * log.dt)
    v[0] = np.linalg.norm(tip[1] - tip[0]) / log.dt
    v[-1] = np.linalg.norm(tip[-1] - tip[-2]) / log.dt
    return v
