"""Simulated tendon-driven flexible endoscope.

Kinematics: a rigid proximal body followed by a single constant-curvature
steerable segment, mounted on a linear insertion stage.  Two antagonistic
tendon pairs (one motor each) set the bend; the stage sets insertion depth.
Low-level dynamics: each motor velocity tracks its command through a PID
loop around a first-order lag; the stage through a proportional loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import OutOfRange

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ContinuumParams:
    flex_length: float = 70.0          # mm, steerable segment
    rigid_length: float = 58.0         # mm, proximal body
    outer_diameter: float = 10.0       # mm
    tendon_pitch_radius: float = 4.0   # mm, tendon offset from backbone
    pulley_radius: float = 1.0         # mm
    motor_max_speed: float = 0.5       # rev/s (30 RPM)
    dead_zone: float = 0.02            # rev half-width of slack region
    asymmetry_gain: float = 1.05       # applied to positive pull of pair 1
    stage_max_speed: float = 5.0       # mm/s
    stage_stroke: float = 200.0        # mm
    # velocity-loop constants
    motor_tau: float = 0.05            # s, first-order motor lag
    pid_kp: float = 3.0
    pid_ki: float = 6.0
    pid_kd: float = 0.02
    stage_kp: float = 5.0
    substep: float = 0.01              # s, internal integration step

    def __post_init__(self):
        if min(self.flex_length, self.rigid_length, self.tendon_pitch_radius,
               self.pulley_radius) <= 0:
            raise ValueError("lengths must be positive")
        if self.motor_max_speed <= 0 or self.dead_zone < 0:
            raise ValueError("bad speed/dead-zone")
        if not (0.5 < self.asymmetry_gain <= 1.5):
            raise ValueError("asymmetry_gain outside (0.5, 1.5]")


@dataclass(frozen=True)
class ActuatorState:
    q: np.ndarray                      # (q1 rev, q2 rev, q3 mm)
    q_dot_actual: np.ndarray           # (rev/s, rev/s, mm/s)
    pid_integral: np.ndarray           # per motor
    pid_prev_meas: np.ndarray          # previous measured velocity, per motor

    @staticmethod
    def at_rest(q=(0.0, 0.0, 0.0)) -> "ActuatorState":
        return ActuatorState(np.asarray(q, dtype=float).copy(),
                             np.zeros(3), np.zeros(2), np.zeros(2))


@dataclass(frozen=True)
class TipPose:
    position: np.ndarray
    orientation: np.ndarray            # 3x3, camera looks along column z
    config: tuple                      # (theta rad, phi rad)


def _tendon_angle(params: ContinuumParams, q_rev: float, pair: int) -> float:
    """Signed bend contribution of one tendon pair, dead-zone applied."""
    dl = params.pulley_radius * TWO_PI * q_rev
    dz = params.pulley_radius * TWO_PI * params.dead_zone
    if abs(dl) <= dz:
        return 0.0
    dl = math.copysign(abs(dl) - dz, dl)
    if pair == 0 and dl > 0.0:
        dl *= params.asymmetry_gain
    return dl / params.tendon_pitch_radius


def _tendon_angle_inverse(params: ContinuumParams, t: float, pair: int) -> float:
    """Motor position (rev) producing bend contribution t; 0 maps to 0."""
    if t == 0.0:
        return 0.0
    dl = t * params.tendon_pitch_radius
    if pair == 0 and dl > 0.0:
        dl /= params.asymmetry_gain
    dz = params.pulley_radius * TWO_PI * params.dead_zone
    dl = math.copysign(abs(dl) + dz, dl)
    return dl / (params.pulley_radius * TWO_PI)


def inverse_bend(params: ContinuumParams, theta: float, phi: float):
    """Motor positions (q1, q2) realizing a bend (theta, phi).

    Inverse of bend_config up to the dead-zone plateau: bend_config of the
    result reproduces (theta, phi) exactly for theta > 0.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    t1 = theta * math.cos(phi)
    t2 = theta * math.sin(phi)
    return (_tendon_angle_inverse(params, t1, 0),
            _tendon_angle_inverse(params, t2, 1))


def _rot_from_axis_angle(axis, angle):
    ax = np.asarray(axis, dtype=float)
    k = ax / np.linalg.norm(ax)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * (kx @ kx)


def bend_config(params: ContinuumParams, q) -> tuple[float, float]:
    """(theta, phi) of the constant-curvature section for actuation q."""
    t1 = _tendon_angle(params, float(q[0]), 0)
    t2 = _tendon_angle(params, float(q[1]), 1)
    theta = math.hypot(t1, t2)
    phi = math.atan2(t2, t1) if theta > 0 else 0.0
    return theta, phi


def forward_kinematics(params: ContinuumParams, q, base=None) -> TipPose:
    """Tip pose for actuation q, relative to an insertion base frame.

    base is a (origin, rotation) pair; default is the world frame.  The tip
    chain is: advance q3 along the base z axis, rigid body straight, then a
    circular arc of length flex_length with curvature theta/flex_length in
    bend plane phi.
    """
    q = np.asarray(q, dtype=float)
    if not (0.0 <= q[2] <= 200.0 + 1e-9):
        raise OutOfRange("insertion depth outside stage stroke")
    if base is None:
        base_origin, base_rot = np.zeros(3), np.eye(3)
    else:
        base_origin, base_rot = base
    theta, phi = bend_config(params, q)
    length = params.flex_length
    if theta < 1e-12:
        local_tip = np.array([0.0, 0.0, length])
        local_rot = np.eye(3)
    else:
        radius = length / theta
        in_plane = radius * (1.0 - math.cos(theta))
        local_tip = np.array([in_plane * math.cos(phi),
                              in_plane * math.sin(phi),
                              radius * math.sin(theta)])
        axis = np.array([-math.sin(phi), math.cos(phi), 0.0])
        local_rot = _rot_from_axis_angle(axis, theta)
    z_local = np.array([0.0, 0.0, q[2] + params.rigid_length])
    position = base_origin + base_rot @ (z_local + local_tip)
    orientation = base_rot @ local_rot
    return TipPose(position=position, orientation=orientation,
                   config=(theta, phi))


def fd_plant_jacobian(params: ContinuumParams, q, h: float = 1e-5) -> np.ndarray:
    """Central-difference d(tip position)/dq, used as a test oracle."""
    if h <= 0:
        raise ValueError("h must be positive")
    q = np.asarray(q, dtype=float)
    cols = []
    for n in range(3):
        e = np.zeros(3)
        e[n] = h
        p_plus = forward_kinematics(params, q + e).position
        p_minus = forward_kinematics(params, q - e).position
        cols.append((p_plus - p_minus) / (2.0 * h))
    return np.column_stack(cols)


def step_actuators(state: ActuatorState, command, dt: float,
                   params: ContinuumParams) -> ActuatorState:
    """Advance actuator dynamics by dt under a velocity command.

    Commands are clamped, never rejected.  Motors: PID around a first-order
    lag with anti-windup; stage: proportional velocity tracking.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cmd = np.asarray(command, dtype=float).copy()
    cmd[0] = np.clip(cmd[0], -params.motor_max_speed, params.motor_max_speed)
    cmd[1] = np.clip(cmd[1], -params.motor_max_speed, params.motor_max_speed)
    cmd[2] = np.clip(cmd[2], -params.stage_max_speed, params.stage_max_speed)

    q = state.q.copy()
    vel = state.q_dot_actual.copy()
    integ = state.pid_integral.copy()
    prev_e = state.pid_prev_meas.copy()

    n_sub = max(1, int(round(dt / params.substep)))
    h = dt / n_sub
    for _ in range(n_sub):
        for m in range(2):
            e = cmd[m] - vel[m]
            # derivative on the measurement; derivative on the error would
            # inject a kick of gain kd/h at every command change
            dv = (vel[m] - prev_e[m]) / h
            u = params.pid_kp * e + params.pid_ki * integ[m] - params.pid_kd * dv
            saturated = abs(vel[m]) >= params.motor_max_speed - 1e-12
            if not (saturated and e * vel[m] > 0):
                integ[m] += e * h
            prev_e[m] = vel[m]
            # semi-implicit update of the first-order lag (stable for any h)
            vel[m] = (vel[m] + h * u / params.motor_tau) / (1.0 + h / params.motor_tau)
            vel[m] = np.clip(vel[m], -params.motor_max_speed,
                             params.motor_max_speed)
            q[m] += h * vel[m]
        vel[2] += h * params.stage_kp * (cmd[2] - vel[2])
        vel[2] = np.clip(vel[2], -params.stage_max_speed, params.stage_max_speed)
        q[2] += h * vel[2]
        q[2] = np.clip(q[2], 0.0, params.stage_stroke)
    return ActuatorState(q=q, q_dot_actual=vel, pid_integral=integ,
                         pid_prev_meas=prev_e)
