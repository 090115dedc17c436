"""Model-less visual-servoing controller.

The image Jacobian is estimated once per trial by perturbing each actuator
and reading the detected target displacement; it is not updated afterwards.
Task-space velocity comes from an attractive potential well over the image
error (quadratic core, conic far field) integrated with damped explicit
Euler; actuator rates follow from the Moore-Penrose pseudoinverse.  Forward
insertion is allowed only once the target sits within the delta_c disc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import Aborted, TargetLostDuringProbe, ZeroStep


@dataclass(frozen=True)
class ControlParams:
    delta: float = 25.0            # px, well border
    delta_c: float = 15.0          # px, forward-motion gate (0.6 * delta)
    dt: float = 0.1                # s, control period
    mass: float = 1.0              # force-to-acceleration constant
    damping: float = 0.15          # per-step velocity damping, [0, 1)
    zeta: float = 1.0              # potential gain, 1/s^2
    v_max: float = 200.0           # px/s clamp on task velocity
    q_step: float = 2.0            # mm/s insertion speed while advancing
    jac_step: float = 0.05         # probe magnitude (motor rev / mm)
    lost_timeout: float = 5.0      # s of NoTarget before aborting
    potential: str = "standard"    # "standard" | "paper-literal"

    def __post_init__(self):
        if not (0.0 < self.delta_c < self.delta):
            raise ValueError("need 0 < delta_c < delta")
        if self.dt <= 0 or self.mass <= 0 or self.q_step <= 0:
            raise ValueError("dt, mass, q_step must be positive")
        if not (0.0 <= self.damping < 1.0):
            raise ValueError("damping outside [0, 1)")
        if self.potential not in ("standard", "paper-literal"):
            raise ValueError("unknown potential variant")


@dataclass(frozen=True)
class ErrorVector:
    """r = c - p_hat, the pixel error from detected target to image center."""

    r: np.ndarray

    @property
    def rho(self) -> float:
        return float(np.linalg.norm(self.r))

    @staticmethod
    def from_points(center, p_hat) -> "ErrorVector":
        return ErrorVector(np.asarray(center, dtype=float)
                           - np.asarray(p_hat, dtype=float))


@dataclass(frozen=True)
class JacobianEstimate:
    """2x3 image Jacobian in px per (rev, rev, mm)."""

    J: np.ndarray

    def __post_init__(self):
        if self.J.shape != (2, 3) or not np.all(np.isfinite(self.J)):
            raise ValueError("Jacobian must be a finite 2x3 matrix")

    @property
    def J_centering(self) -> np.ndarray:
        out = self.J.copy()
        out[:, 2] = 0.0
        return out


class Mode(Enum):
    CENTERING = "centering"
    ADVANCING = "advancing"
    LOST = "lost"


@dataclass(frozen=True)
class ControllerState:
    mode: Mode = Mode.CENTERING
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))
    time_lost: float = 0.0


def estimate_jacobian(feature_fn, q0, jac_step: float) -> JacobianEstimate:
    """Central-difference image Jacobian by probing each actuator.

    feature_fn maps an actuation vector to the detected target (px); it
    should raise NoLumen when the target is invisible, which surfaces as
    TargetLostDuringProbe.
    """
    if jac_step == 0.0:
        raise ZeroStep("jac_step must be nonzero")
    from .errors import NoLumen
    q0 = np.asarray(q0, dtype=float)
    cols = []
    for n in range(3):
        e = np.zeros(3)
        e[n] = jac_step
        try:
            f_plus = np.asarray(feature_fn(q0 + e), dtype=float)
            f_minus = np.asarray(feature_fn(q0 - e), dtype=float)
        except NoLumen as exc:
            raise TargetLostDuringProbe(f"target lost probing axis {n}") from exc
        cols.append((f_plus - f_minus) / (2.0 * jac_step))
    return JacobianEstimate(np.column_stack(cols))


def potential_value(rho: float, params: ControlParams) -> float:
    """Explicit attractive potential U(rho); continuous at rho = delta."""
    z, d = params.zeta, params.delta
    if params.potential == "paper-literal":
        # psi1 = min(1, rho/delta) makes the core cubic
        if rho < d:
            return 0.5 * (rho / d) * rho * rho * z
        return z * d * rho - 0.5 * z * d * d
    if rho < d:
        return 0.5 * z * rho * rho
    return z * d * rho - 0.5 * z * d * d


def potential_gradient(r: ErrorVector, params: ControlParams) -> np.ndarray:
    """Attractive-well gradient, pointing from p_hat toward the center."""
    rho = r.rho
    if rho == 0.0:
        return np.zeros(2)
    z, d = params.zeta, params.delta
    if params.potential == "paper-literal":
        mag = 1.5 * z * rho * rho / d if rho < d else z * d
    else:
        mag = z * rho if rho < d else z * d
    return mag * r.r / rho


def velocity_update(v, r: ErrorVector, params: ControlParams) -> np.ndarray:
    """One damped Euler step of the force-velocity relation."""
    grad = potential_gradient(r, params)
    v_new = (1.0 - params.damping) * np.asarray(v, dtype=float) \
        + (params.dt / params.mass) * grad
    speed = float(np.linalg.norm(v_new))
    if speed > params.v_max:
        v_new *= params.v_max / speed
    return v_new


def resolved_rates(jac: JacobianEstimate, v, centering: bool) -> np.ndarray:
    """Minimum-norm actuator rates for a task velocity via the pseudoinverse."""
    J = jac.J_centering if centering else jac.J
    return np.linalg.pinv(J, rcond=1e-8) @ np.asarray(v, dtype=float)


@dataclass(frozen=True)
class Observation:
    """Either a filtered target point or a lost-target frame."""

    p_hat: np.ndarray | None

    @staticmethod
    def target(p_hat) -> "Observation":
        return Observation(np.asarray(p_hat, dtype=float))

    @staticmethod
    def no_target() -> "Observation":
        return Observation(None)


def control_step(ctl: ControllerState, obs: Observation, params: ControlParams,
                 jac: JacobianEstimate, center) -> tuple[np.ndarray, ControllerState]:
    """Advance the mode machine one period; returns (q_dot command, state')."""
    if obs.p_hat is None:
        time_lost = ctl.time_lost + params.dt
        # half-step slack so accumulated float error cannot defer the abort
        if time_lost >= params.lost_timeout - 0.5 * params.dt:
            raise Aborted(f"target lost for {time_lost:.1f} s")
        return np.zeros(3), replace(ctl, mode=Mode.LOST, time_lost=time_lost)
    err = ErrorVector.from_points(center, obs.p_hat)
    if err.rho < params.delta_c:
        cmd = np.array([0.0, 0.0, params.q_step])
        return cmd, ControllerState(mode=Mode.ADVANCING, v=np.zeros(2),
                                    time_lost=0.0)
    v_new = velocity_update(ctl.v, err, params)
    q_dot = resolved_rates(jac, v_new, centering=True)
    q_dot[2] = 0.0
    return q_dot, ControllerState(mode=Mode.CENTERING, v=v_new, time_lost=0.0)
