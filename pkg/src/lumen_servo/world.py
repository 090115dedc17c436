"""Tubular phantom geometry: centerline paths A-D, clearance and ray queries.

The navigable world is a capsule sweep: all points within ``inner_radius`` of
an analytic, tangent-continuous centerline.  Four built-in paths mirror the
validation phantoms (straight, left curve, right curve, S-curve); all are
sized so the axial travel to the goal plane is 130 mm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _geom
from .errors import InvalidRay, OutOfRange

# Depth at which the goal plane sits, and the extra tube beyond it so the
# camera still sees lumen (deep hits past d_lumen) when crossing.
GOAL_DEPTH = 130.0
AXIAL_DEPTH = 195.0
DEFAULT_ARC_RADIUS = 120.0
DEFAULT_SWEEP = math.radians(45.0)
S_CURVE_SWEEP = math.radians(30.0)
S_CURVE_RADIUS = 150.0

_EPS_TANGENT = 1e-12


def _seg_straight(a, u, length):
    row = np.zeros(12)
    row[0] = _geom.KIND_STRAIGHT
    row[1:4] = a
    row[4:7] = u
    row[11] = length
    return row


def _seg_arc(a, u, w, radius, sweep):
    row = np.zeros(12)
    row[0] = _geom.KIND_ARC
    row[1:4] = a
    row[4:7] = u
    row[7:10] = w
    row[10] = radius
    row[11] = radius * sweep
    return row


def _seg_end(row):
    """End point and end tangent of one packed segment row."""
    a = row[1:4]
    u = row[4:7]
    if row[0] == _geom.KIND_STRAIGHT:
        return a + row[11] * u, u.copy()
    w = row[7:10]
    radius = row[10]
    ang = row[11] / radius
    center = a + radius * w
    p = center + radius * (-w * math.cos(ang) + u * math.sin(ang))
    t = w * math.sin(ang) + u * math.cos(ang)
    return p, t


@dataclass(frozen=True)
class LumenPath:
    """Piecewise straight/arc centerline, C1-continuous by construction."""

    kind: str
    segments: np.ndarray
    total_arc_length: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total_arc_length",
                           float(self.segments[:, 11].sum()))

    @staticmethod
    def from_pieces(kind: str, pieces) -> "LumenPath":
        """Build from a list of ('straight', length) / ('arc', radius, sweep,
        direction) tuples, chaining start frames.  direction is the in-plane
        bend sign: +1 bends toward +x, -1 toward -x (paths live in x-z)."""
        a = np.zeros(3)
        u = np.array([0.0, 0.0, 1.0])
        rows = []
        for piece in pieces:
            if piece[0] == "straight":
                row = _seg_straight(a, u, float(piece[1]))
            elif piece[0] == "arc":
                radius, sweep, direction = float(piece[1]), float(piece[2]), float(piece[3])
                # in-plane normal: rotate tangent by +-90 deg about +y
                n = np.array([0.0, direction, 0.0])
                w = np.cross(n, u)
                w /= np.linalg.norm(w)
                row = _seg_arc(a, u, w, radius, sweep)
            else:
                raise ValueError(f"unknown piece kind {piece[0]!r}")
            rows.append(row)
            a, u = _seg_end(row)
        return LumenPath(kind, np.asarray(rows))

    def point_tangent(self, s: float):
        """Centerline point and unit tangent at arc length s (unchecked)."""
        segs = self.segments
        if s < 0.0:
            a = segs[0, 1:4]
            u = segs[0, 4:7]
            return a + s * u, u.copy()
        rem = s
        for i in range(len(segs)):
            row = segs[i]
            length = row[11]
            if rem <= length or i == len(segs) - 1:
                a = row[1:4]
                u = row[4:7]
                if row[0] == _geom.KIND_STRAIGHT:
                    return a + rem * u, u.copy()
                w = row[7:10]
                radius = row[10]
                ang = rem / radius
                center = a + radius * w
                p = center + radius * (-w * math.cos(ang) + u * math.sin(ang))
                t = w * math.sin(ang) + u * math.cos(ang)
                return p, t
            rem -= length
        raise AssertionError("unreachable")

    @property
    def end_point(self):
        return _seg_end(self.segments[-1])


def _exit_straight(kind, lead, arc_pieces, axial_so_far, exit_dir_z):
    """Solve the tail straight so total axial depth equals AXIAL_DEPTH."""
    tail = (AXIAL_DEPTH - axial_so_far) / exit_dir_z
    return LumenPath.from_pieces(kind, lead + arc_pieces + [("straight", tail)])


def build_path(name: str) -> LumenPath:
    """Built-in paths selectable by name A|B|C|D."""
    name = name.upper()
    r = DEFAULT_ARC_RADIUS
    sw = DEFAULT_SWEEP
    if name == "A":
        return LumenPath.from_pieces("StraightA", [("straight", AXIAL_DEPTH)])
    if name in ("B", "C"):
        direction = 1.0 if name == "B" else -1.0
        kind = "LeftCurveB" if name == "B" else "RightCurveC"
        axial = 40.0 + r * math.sin(sw)
        return _exit_straight(kind, [("straight", 40.0)],
                              [("arc", r, sw, direction)], axial, math.cos(sw))
    if name == "D":
        # S-curve: two opposite bends, the second still developing at the
        # goal depth
        r2, sw2 = S_CURVE_RADIUS, S_CURVE_SWEEP
        axial = 20.0 + r2 * math.sin(sw2) + 10.0 * math.cos(sw2) + r2 * math.sin(sw2)
        return _exit_straight(
            "SCurveD",
            [("straight", 20.0), ("arc", r2, sw2, 1.0), ("straight", 10.0)],
            [("arc", r2, sw2, -1.0)], axial, 1.0)
    raise ValueError(f"unknown path {name!r}")


@dataclass(frozen=True)
class TubePhantom:
    """Capsule-swept tube around a centerline path."""

    path: LumenPath
    inner_radius: float = 7.5
    wall_thickness: float = 2.0

    def __post_init__(self):
        if self.inner_radius <= 0:
            raise ValueError("inner_radius must be positive")

    def _cap(self):
        p, t = self.path.end_point
        return np.ascontiguousarray(p), np.ascontiguousarray(t)


@dataclass(frozen=True)
class GoalPlane:
    origin: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        n = np.linalg.norm(self.normal)
        if abs(n - 1.0) > 1e-12:
            raise ValueError("goal plane normal must be unit length")


def default_goal_plane(path: LumenPath) -> GoalPlane:
    """Plane perpendicular to the insertion axis at the 130 mm travel depth."""
    _, u0 = path.point_tangent(0.0)
    origin = path.segments[0, 1:4] + GOAL_DEPTH * u0
    return GoalPlane(origin=origin, normal=u0 / np.linalg.norm(u0))


def centerline_point(path: LumenPath, s: float):
    """Point and unit tangent on the centerline at arc length s."""
    if s < 0.0 or s > path.total_arc_length + 1e-12:
        raise OutOfRange(f"s={s} outside [0, {path.total_arc_length}]")
    return path.point_tangent(s)


def radial_clearance(phantom: TubePhantom, p) -> tuple[float, float]:
    """(distance to centerline, inner_radius - distance) for a point."""
    p = np.asarray(p, dtype=float)
    dist, s = _geom.dist_to_centerline(phantom.path.segments, p[0], p[1], p[2])
    path = phantom.path
    eps = 1e-9
    if s <= eps:
        a, u = path.point_tangent(0.0)
        if float(np.dot(p - a, u)) < -eps:
            raise OutOfRange("point lies behind the tube opening")
    elif s >= path.total_arc_length - eps:
        a, u = path.point_tangent(path.total_arc_length)
        if float(np.dot(p - a, u)) > eps:
            raise OutOfRange("point lies beyond the tube end")
    return float(dist), float(phantom.inner_radius - dist)


def wall_clearance(phantom: TubePhantom, p, entrance_open: bool = True) -> float:
    """Signed distance from a point to the nearest solid surface.

    Unlike :func:`radial_clearance` this treats the region in front of the
    phantom opening as free space, so it is usable while the tip is still
    outside the tube.  Negative values mean penetration.
    """
    p = np.asarray(p, dtype=float)
    cap_pt, cap_tan = phantom._cap()
    f, _ = _geom._scene_sdf(phantom.path.segments, phantom.inner_radius,
                            cap_pt, cap_tan, p[0], p[1], p[2], entrance_open)
    return float(f)


@dataclass(frozen=True)
class HitResult:
    kind: str           # "wall" | "exit" | "none"
    distance: float

    @property
    def is_wall(self):
        return self.kind == "wall"

    @property
    def is_exit(self):
        return self.kind == "exit"


_CODE_TO_KIND = {_geom.HIT_NONE: "none", _geom.HIT_WALL: "wall",
                 _geom.HIT_EXIT: "exit", _geom.HIT_ENTRANCE: "exit"}


def ray_tube_hit(phantom: TubePhantom, origin, direction, max_range: float = 400.0,
                 tol: float = 1e-4) -> HitResult:
    """First intersection of a ray (origin strictly inside) with the tube.

    Exits through either end cap report ``exit``; everything else that
    terminates within range is a wall hit.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise InvalidRay("direction must be a unit vector")
    dist, _ = _geom.dist_to_centerline(phantom.path.segments,
                                       origin[0], origin[1], origin[2])
    if dist >= phantom.inner_radius:
        raise InvalidRay("ray origin is not inside the tube")
    cap_pt, cap_tan = phantom._cap()
    code, t = _geom.march(phantom.path.segments, phantom.inner_radius,
                          cap_pt, cap_tan,
                          origin[0], origin[1], origin[2],
                          direction[0], direction[1], direction[2],
                          max_range, False, tol, 2.0 * tol)
    return HitResult(_CODE_TO_KIND[code], float(t))


def goal_crossed(plane: GoalPlane, tip) -> bool:
    """True once the tip reaches or passes the goal plane."""
    tip = np.asarray(tip, dtype=float)
    return float(np.dot(tip - plane.origin, plane.normal)) >= 0.0
