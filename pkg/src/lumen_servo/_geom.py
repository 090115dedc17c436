"""Numba kernels for centerline distance queries and sphere-marched ray casts.

Segments are packed row-wise into a float64 array with columns
    0: kind (0 = straight, 1 = arc)
    1-3: start point a
    4-6: start tangent u (unit)
    7-9: unit vector w from start point toward the arc center (arcs only)
    10: arc radius (arcs only)
    11: segment arc length
All lengths in millimetres.
"""

import numpy as np
from numba import njit, prange

KIND_STRAIGHT = 0.0
KIND_ARC = 1.0

# hit codes produced by the marchers
HIT_NONE = 0
HIT_WALL = 1
HIT_EXIT = 2
HIT_ENTRANCE = 3
HIT_FACE = 4        # entrance face plane / opening rim, seen from outside


@njit(cache=True)
def _seg_dist(seg, px, py, pz):
    """Exact distance from a point to one centerline segment.

    Returns (distance, s_local) where s_local is the arc-length parameter of
    the closest centerline point within the segment.
    """
    ax, ay, az = seg[1], seg[2], seg[3]
    ux, uy, uz = seg[4], seg[5], seg[6]
    length = seg[11]
    vx, vy, vz = px - ax, py - ay, pz - az
    if seg[0] == KIND_STRAIGHT:
        t = vx * ux + vy * uy + vz * uz
        if t < 0.0:
            t = 0.0
        elif t > length:
            t = length
        dx = vx - t * ux
        dy = vy - t * uy
        dz = vz - t * uz
        return np.sqrt(dx * dx + dy * dy + dz * dz), t
    # arc: center O = a + R*w, point(s) = O + R*(-w cos(s/R) + u sin(s/R))
    wx, wy, wz = seg[7], seg[8], seg[9]
    radius = seg[10]
    ox, oy, oz = ax + radius * wx, ay + radius * wy, az + radius * wz
    cx, cy, cz = px - ox, py - oy, pz - oz
    # components of p-O in the arc plane basis (u, -w)
    su = cx * ux + cy * uy + cz * uz
    sw = -(cx * wx + cy * wy + cz * wz)
    ang = np.arctan2(su, sw)
    sweep = length / radius
    if 0.0 <= ang <= sweep:
        s = ang * radius
        ca = np.cos(ang)
        sa = np.sin(ang)
        qx = ox + radius * (-wx * ca + ux * sa)
        qy = oy + radius * (-wy * ca + uy * sa)
        qz = oz + radius * (-wz * ca + uz * sa)
        dx, dy, dz = px - qx, py - qy, pz - qz
        return np.sqrt(dx * dx + dy * dy + dz * dz), s
    # clamp to whichever endpoint is closer
    d0 = np.sqrt(vx * vx + vy * vy + vz * vz)
    ce = np.cos(sweep)
    se = np.sin(sweep)
    ex = ox + radius * (-wx * ce + ux * se)
    ey = oy + radius * (-wy * ce + uy * se)
    ez = oz + radius * (-wz * ce + uz * se)
    dx, dy, dz = px - ex, py - ey, pz - ez
    d1 = np.sqrt(dx * dx + dy * dy + dz * dz)
    if d0 <= d1:
        return d0, 0.0
    return d1, length


@njit(cache=True)
def dist_to_centerline(segs, px, py, pz):
    """Minimum distance to the whole centerline and the global s at the min."""
    best = 1e30
    best_s = 0.0
    s_off = 0.0
    for i in range(segs.shape[0]):
        d, s = _seg_dist(segs[i], px, py, pz)
        if d < best:
            best = d
            best_s = s_off + s
        s_off += segs[i, 11]
    return best, best_s


@njit(cache=True)
def _scene_sdf(segs, r_inner, cap_pt, cap_tan, px, py, pz, entrance_open):
    """Distance to the nearest solid surface, with a code for which one.

    The open region is the capsule-swept tube interior, plus (when
    entrance_open) the free half-space in front of the phantom face at the
    tube opening.  Negative values mean the point is inside the solid.
    """
    a0x, a0y, a0z = segs[0, 1], segs[0, 2], segs[0, 3]
    u0x, u0y, u0z = segs[0, 4], segs[0, 5], segs[0, 6]
    zeta = (px - a0x) * u0x + (py - a0y) * u0y + (pz - a0z) * u0z
    if entrance_open and zeta < 1.0:
        lx = px - a0x - zeta * u0x
        ly = py - a0y - zeta * u0y
        lz = pz - a0z - zeta * u0z
        lat = np.sqrt(lx * lx + ly * ly + lz * lz)
        if zeta < 0.0:
            if lat >= r_inner:
                return -zeta, HIT_FACE
            gap = r_inner - lat
            return np.sqrt(zeta * zeta + gap * gap), HIT_FACE
        if lat >= r_inner:
            # marched past the face into the slab (grazing rays can overstep
            # by min_step); report penetration depth so the hit registers
            return -zeta, HIT_FACE
    d_cl, _ = dist_to_centerline(segs, px, py, pz)
    d_wall = r_inner - d_cl
    d_exit = (cap_pt[0] - px) * cap_tan[0] + (cap_pt[1] - py) * cap_tan[1] \
        + (cap_pt[2] - pz) * cap_tan[2]
    if entrance_open:
        if d_exit < d_wall:
            return d_exit, HIT_EXIT
        return d_wall, HIT_WALL
    # closed-entrance variant: both end caps terminate rays as Exit
    if zeta < d_wall or d_exit < d_wall:
        if zeta < d_exit:
            return zeta, HIT_ENTRANCE
        return d_exit, HIT_EXIT
    return d_wall, HIT_WALL


@njit(cache=True)
def march(segs, r_inner, cap_pt, cap_tan, ox, oy, oz, dx, dy, dz,
          max_range, entrance_open, tol, min_step):
    """Sphere-march one ray.  Returns (hit code, distance travelled)."""
    t = 0.0
    for _ in range(100000):
        px, py, pz = ox + t * dx, oy + t * dy, oz + t * dz
        f, code = _scene_sdf(segs, r_inner, cap_pt, cap_tan, px, py, pz,
                             entrance_open)
        if f < tol:
            return code, t
        step = f
        if step < min_step:
            step = min_step
        t += step
        if t > max_range:
            return HIT_NONE, max_range
    return HIT_NONE, t


@njit(cache=True, parallel=True)
def march_many(segs, r_inner, cap_pt, cap_tan, origin, dirs,
               max_range, entrance_open, tol, min_step):
    n = dirs.shape[0]
    codes = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for i in prange(n):
        code, t = march(segs, r_inner, cap_pt, cap_tan,
                        origin[0], origin[1], origin[2],
                        dirs[i, 0], dirs[i, 1], dirs[i, 2],
                        max_range, entrance_open, tol, min_step)
        codes[i] = code
        dists[i] = t
    return codes, dists
