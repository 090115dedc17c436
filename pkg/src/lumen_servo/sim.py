"""Closed-loop trial runner: render -> segment -> center -> control -> act.

Two experiment geometries share the loop:

* Centering: the instrument is clamped in free space in front of the phantom
  opening, bent so the detected lumen center starts >= 320 px off the image
  center; insertion is disabled and only the bend motors act.
* Navigation: the instrument is inserted through the phantom; its shaft
  conforms to the lumen centerline, so the base frame of the steerable
  section rides the path at the current insertion depth while the controller
  keeps the camera centered and advances.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import control, perception, plant, world
from .config import ExperimentConfig
from .errors import (Aborted, CameraOutsideLumen, InfeasibleStart, NoLumen,
                     TargetLostDuringProbe)
from .metrics import TrialLog

_SHIM_DECAY = 60.0       # mm of insertion over which a lateral mounting
                         # offset is squeezed out by the lumen


def rotation_to_z(u) -> np.ndarray:
    """Minimal rotation taking the +z axis onto unit vector u."""
    u = np.asarray(u, dtype=float)
    c = u[2]
    if c > 1.0 - 1e-12:
        return np.eye(3)
    if c < -1.0 + 1e-12:
        return np.diag([1.0, -1.0, -1.0])
    axis = np.cross([0.0, 0.0, 1.0], u)
    s = np.linalg.norm(axis)
    k = axis / s
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * kx + (1.0 - c) * (kx @ kx)


def _flex_offset(params: plant.ContinuumParams, theta: float, phi: float):
    """Tip offset of the steerable section alone, in its base frame."""
    length = params.flex_length
    if theta < 1e-9:
        return np.array([0.0, 0.0, length])
    radius = length / theta
    return np.array([radius * (1.0 - math.cos(theta)) * math.cos(phi),
                     radius * (1.0 - math.cos(theta)) * math.sin(phi),
                     radius * math.sin(theta)])


class FixedMount:
    """Clamped base for the free-space centering protocol."""

    def __init__(self, origin, rot):
        self._base = (np.asarray(origin, dtype=float), np.asarray(rot, dtype=float))

    def base(self, q3: float):
        return self._base


class ConformingMount:
    """Shaft-conforming insertion: the steerable section's base follows the
    lumen centerline at the current insertion depth.

    The proximal shaft behind it is passive and not simulated.  A lateral
    mounting shim (from the bent start posture) decays with insertion as the
    lumen wall squeezes the shaft onto the centerline.
    """

    def __init__(self, path: world.LumenPath, params: plant.ContinuumParams,
                 theta0: float, phi0: float, s_tip0: float):
        self.path = path
        self.rigid = params.rigid_length
        off = _flex_offset(params, theta0, phi0)
        self.sigma0 = s_tip0 - off[2]
        self.shim0 = np.array([-off[0], -off[1], 0.0])

    def base(self, q3: float):
        sigma = self.sigma0 + q3
        point, tangent = self.path.point_tangent(sigma)
        rot = rotation_to_z(tangent)
        shim = self.shim0 * math.exp(-max(q3, 0.0) / _SHIM_DECAY)
        origin = point + rot @ (shim - np.array([0.0, 0.0, self.rigid]))
        return origin, rot


@dataclass
class TrialResult:
    trial_id: int
    log: TrialLog
    status: str                  # Completed | Aborted | Collided
    reason: str | None = None

    @property
    def completed(self) -> bool:
        return self.status == "Completed"


class _Recorder:
    def __init__(self, dt: float, path_id: str):
        self.rows = {k: [] for k in ("t", "q", "q_dot", "tip", "p", "p_hat",
                                     "rho", "v", "mode", "clearance")}
        self.dt = dt
        self.path_id = path_id

    def push(self, t, state, tip, p, p_hat, rho, v, mode, clearance):
        r = self.rows
        r["t"].append(t)
        r["q"].append(state.q.copy())
        r["q_dot"].append(state.q_dot_actual.copy())
        r["tip"].append(np.asarray(tip, dtype=float))
        r["p"].append(np.full(2, np.nan) if p is None else np.asarray(p, dtype=float))
        r["p_hat"].append(np.full(2, np.nan) if p_hat is None else np.asarray(p_hat, dtype=float))
        r["rho"].append(np.nan if rho is None else float(rho))
        r["v"].append(np.asarray(v, dtype=float))
        r["mode"].append(mode)
        r["clearance"].append(float(clearance))

    def log(self) -> TrialLog:
        r = self.rows
        return TrialLog(t=np.asarray(r["t"]), q=np.asarray(r["q"]),
                        q_dot=np.asarray(r["q_dot"]), tip=np.asarray(r["tip"]),
                        p=np.asarray(r["p"]), p_hat=np.asarray(r["p_hat"]),
                        rho=np.asarray(r["rho"]), v=np.asarray(r["v"]),
                        mode=r["mode"], clearance=np.asarray(r["clearance"]),
                        dt=self.dt, path_id=self.path_id)


class TrialRunner:
    """Runs seeded centering / navigation trials for one configuration."""

    def __init__(self, cfg: ExperimentConfig,
                 backend: perception.PerceptionBackend | None = None):
        self.cfg = cfg
        self.path = world.build_path(cfg.path_id)
        self.phantom = world.TubePhantom(self.path, inner_radius=cfg.inner_radius)
        self.goal = world.default_goal_plane(self.path)
        self.cam = cfg.perception.camera
        self.stride = cfg.perception.control_stride
        self.d_lumen = cfg.perception.d_lumen
        self.backend = backend or perception.GeometricBackend(self.d_lumen)
        self.center = np.asarray(self.cam.center)

    # -- perception ---------------------------------------------------------

    def _detect(self, pose, frames: deque, noise_rng=None):
        """One perception cycle; returns the raw detection in full-res px."""
        frame, _ = perception.render_lumen(self.phantom, pose, self.cam,
                                           d_lumen=self.d_lumen,
                                           stride=self.stride)
        frames.append(frame)
        while len(frames) < 3:
            frames.appendleft(frame)
        mask = self.backend.segment(list(frames))
        if not self.cfg.noise.is_identity:
            mask = perception.corrupt(mask, self.cfg.noise, noise_rng)
        try:
            grid = perception.centroid(mask)
        except NoLumen:
            return None
        return grid * self.stride + (self.stride - 1) / 2.0

    def _probe_feature(self, mount):
        """Stateless feature map q -> detected center, for Jacobian probing."""
        def feature(q):
            pose = self._pose(mount, q)
            p = self._detect(pose, deque(maxlen=3))
            if p is None:
                raise NoLumen("no lumen at probe pose")
            return p
        return feature

    def _pose(self, mount, q) -> plant.TipPose:
        # insertion is realized through the mount, not the kinematic chain
        return plant.forward_kinematics(self.cfg.plant, (q[0], q[1], 0.0),
                                        base=mount.base(q[2]))

    # -- start-pose sampling ------------------------------------------------

    def _centering_start(self, rng, z_start: float = -100.0,
                         rho_band=(322.0, 342.0)):
        """Sample a clamped bent start with detected rho inside rho_band.

        Start directions hug the image diagonals: with a 90 deg FOV a 320 px
        offset only fits inside the frame there.
        """
        params = self.cfg.plant
        for _ in range(40):
            quadrant = int(rng.integers(4))
            alpha = math.radians(90.0 * quadrant + rng.uniform(33.0, 42.0))
            phi = alpha + math.pi   # camera tilts away from the blob
            lo, hi = 0.45, 1.05
            found = None
            for _ in range(30):
                theta = 0.5 * (lo + hi)
                q1, q2 = plant.inverse_bend(params, theta, phi)
                tip0 = plant.forward_kinematics(params, (q1, q2, 0.0))
                origin = np.array([0.0, 0.0, z_start]) - tip0.position
                mount = FixedMount(origin, np.eye(3))
                p = self._detect(self._pose(mount, (q1, q2, 0.0)), deque(maxlen=3))
                if p is None:
                    hi = theta
                    continue
                rho = float(np.linalg.norm(p - self.center))
                if rho < rho_band[0]:
                    lo = theta
                elif rho > rho_band[1]:
                    hi = theta
                else:
                    found = (np.array([q1, q2, 0.0]), mount)
                    break
            if found is None:
                continue
            q0, mount = found
            try:
                jac = control.estimate_jacobian(self._probe_feature(mount), q0,
                                                self.cfg.control.jac_step)
            except TargetLostDuringProbe:
                continue
            return q0, mount, jac
        raise InfeasibleStart("could not sample a valid centering start pose")

    def _navigation_start(self, rng, s_tip0: float = 2.0):
        params = self.cfg.plant
        for _ in range(40):
            theta0 = float(rng.uniform(0.04, 0.12))
            phi0 = float(rng.uniform(-math.pi, math.pi))
            q1, q2 = plant.inverse_bend(params, theta0, phi0)
            q0 = np.array([q1, q2, 0.0])
            mount = ConformingMount(self.path, params, theta0, phi0, s_tip0)
            pose = self._pose(mount, q0)
            if world.wall_clearance(self.phantom, pose.position) <= 0.5:
                continue
            try:
                jac = control.estimate_jacobian(self._probe_feature(mount), q0,
                                                self.cfg.control.jac_step)
            except TargetLostDuringProbe:
                continue
            return q0, mount, jac
        raise InfeasibleStart("could not sample a valid navigation start pose")

    # -- trial loops --------------------------------------------------------

    def _run_loop(self, trial_id, q0, mount, jac, noise_rng, *,
                  insertion: bool, timeout: float, stop_fn=None):
        cp = self.cfg.control
        state = plant.ActuatorState.at_rest(q0)
        ctl = control.ControllerState(mode=control.Mode.CENTERING,
                                      v=np.zeros(2), time_lost=0.0)
        filt = perception.TargetFilter()
        frames: deque = deque(maxlen=3)
        rec = _Recorder(cp.dt, self.cfg.path_id)
        status, reason = "Completed", None
        t = 0.0
        n_steps = int(round(timeout / cp.dt))
        for _ in range(n_steps):
            try:
                pose = self._pose(mount, state.q)
                clearance = world.wall_clearance(self.phantom, pose.position)
                if clearance <= 0.0:
                    rec.push(t, state, pose.position, None, None, None,
                             ctl.v, control.Mode.LOST, clearance)
                    status, reason = "Collided", "tip contacted the wall"
                    break
                p = self._detect(pose, frames, noise_rng)
            except CameraOutsideLumen:
                rec.push(t, state, pose.position, None, None, None,
                         ctl.v, control.Mode.LOST, 0.0)
                status, reason = "Collided", "camera inside the wall"
                break
            if p is None:
                obs = control.Observation.no_target()
                p_hat = None
            else:
                p_hat = filt.update(p)
                obs = control.Observation.target(p_hat)
            rho = (None if p_hat is None
                   else float(np.linalg.norm(p_hat - self.center)))
            try:
                cmd, ctl = control.control_step(ctl, obs, cp, jac, self.center)
            except Aborted as exc:
                rec.push(t, state, pose.position, p, p_hat, rho,
                         ctl.v, control.Mode.LOST, clearance)
                status, reason = "Aborted", str(exc)
                break
            rec.push(t, state, pose.position, p, p_hat, rho,
                     ctl.v, ctl.mode, clearance)
            if stop_fn is not None and stop_fn(t, pose, rho):
                break
            if not insertion:
                cmd[2] = 0.0
            state = plant.step_actuators(state, cmd, cp.dt, self.cfg.plant)
            t += cp.dt
        return TrialResult(trial_id, rec.log(), status, reason)

    def run_centering(self, trial_id: int) -> TrialResult:
        ss = np.random.SeedSequence(self.cfg.rng_seed, spawn_key=(0, trial_id))
        sample_rng, noise_rng = (np.random.default_rng(c) for c in ss.spawn(2))
        q0, mount, jac = self._centering_start(sample_rng)
        p0 = self._detect(self._pose(mount, q0), deque(maxlen=3))
        rho0 = float(np.linalg.norm(p0 - self.center))
        band = 0.1 * rho0
        hold_needed = int(round(5.0 / self.cfg.control.dt))
        held = [0]

        def settled(t, pose, rho):
            held[0] = held[0] + 1 if (rho is not None and rho <= band) else 0
            return held[0] >= hold_needed

        return self._run_loop(trial_id, q0, mount, jac, noise_rng,
                              insertion=False,
                              timeout=self.cfg.centering_timeout,
                              stop_fn=settled)

    def run_navigation(self, trial_id: int) -> TrialResult:
        ss = np.random.SeedSequence(self.cfg.rng_seed, spawn_key=(1, trial_id))
        sample_rng, noise_rng = (np.random.default_rng(c) for c in ss.spawn(2))
        q0, mount, jac = self._navigation_start(sample_rng)

        def at_goal(t, pose, rho):
            return world.goal_crossed(self.goal, pose.position)

        result = self._run_loop(trial_id, q0, mount, jac, noise_rng,
                                insertion=True,
                                timeout=self.cfg.navigation_timeout,
                                stop_fn=at_goal)
        if result.status == "Completed" and not world.goal_crossed(
                self.goal, result.log.tip[-1]):
            return TrialResult(trial_id, result.log, "Aborted", "timeout")
        return result
