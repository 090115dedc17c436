"""Tip-camera rendering, lumen-center detection and segmentation backends.

The geometric renderer casts one ray per pixel against the tube world and
labels a pixel as lumen when its free-ray distance exceeds ``d_lumen``.
Frames are depth-shaded grayscale (endoscope-style: near walls bright, the
deep lumen dark).  The detected center is the mask centroid by image
moments, smoothed by a 4-point moving average.
"""

from __future__ import annotations

import math
import socket
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _geom, protocol
from .errors import CameraOutsideLumen, NoLumen
from .world import TubePhantom, wall_clearance

D_LUMEN_DEFAULT = 25.0      # mm of free ray beyond which a pixel is lumen
RENDER_MAX_RANGE = 400.0    # mm; rays escaping past this report no hit
# Full-brightness distance for the 1/d^2 depth shading.  25 mm keeps hits out
# to RENDER_MAX_RANGE above zero after uint8 quantization, so shade 0 uniquely
# means background (no hit, or the phantom face seen from outside).
_SHADE_REF = 25.0


@dataclass(frozen=True)
class CameraModel:
    width: int = 640
    height: int = 480
    horizontal_fov: float = 1.57

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("camera dimensions must be positive")
        if not (0.0 < self.horizontal_fov < math.pi):
            raise ValueError("fov outside (0, pi)")

    @property
    def center(self):
        return ((self.width - 1) / 2.0, (self.height - 1) / 2.0)

    @property
    def focal(self):
        return ((self.width - 1) / 2.0) / math.tan(self.horizontal_fov / 2.0)


@dataclass(frozen=True)
class Mask:
    """Binary lumen mask; pixels[row, col] with col = u, row = w."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.dtype != np.uint8:
            raise ValueError("mask pixels must be uint8")
        if px.size and int(px.max()) > 1:
            raise ValueError("mask values must be strictly binary")

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def any_lumen(self):
        return bool(self.pixels.any())


@dataclass(frozen=True)
class NoiseConfig:
    flip_prob: float = 0.0
    occluder: tuple | None = None       # ((cx, cy), radius) in px
    illumination_dropout_prob: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.flip_prob <= 1.0
                and 0.0 <= self.illumination_dropout_prob <= 1.0):
            raise ValueError("probabilities must be within [0, 1]")

    @property
    def is_identity(self):
        return (self.flip_prob == 0.0 and self.occluder is None
                and self.illumination_dropout_prob == 0.0)


def _pixel_dirs(cam: CameraModel, stride: int) -> np.ndarray:
    """Camera-frame unit ray directions for a stride-subsampled pixel grid.

    Grid point (i, j) samples full-resolution pixel coordinates
    u = j*stride + (stride-1)/2, w = i*stride + (stride-1)/2, so stride=1
    is exactly one ray per pixel center.
    """
    cx, cy = cam.center
    f = cam.focal
    us = np.arange(cam.width // stride) * stride + (stride - 1) / 2.0
    ws = np.arange(cam.height // stride) * stride + (stride - 1) / 2.0
    uu, ww = np.meshgrid(us, ws)
    dirs = np.stack([(uu - cx) / f, (ww - cy) / f, np.ones_like(uu)], axis=-1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return np.ascontiguousarray(dirs.reshape(-1, 3))


_DIR_CACHE: dict = {}


def _cached_dirs(cam: CameraModel, stride: int) -> np.ndarray:
    key = (cam.width, cam.height, cam.horizontal_fov, stride)
    if key not in _DIR_CACHE:
        _DIR_CACHE[key] = _pixel_dirs(cam, stride)
    return _DIR_CACHE[key]


def render_lumen(phantom: TubePhantom, tip, cam: CameraModel,
                 d_lumen: float = D_LUMEN_DEFAULT, stride: int = 1,
                 tol: float = 1e-3):
    """Render (grayscale frame, lumen Mask) from a tip pose.

    The camera may sit inside the tube or in the free space in front of the
    phantom opening; it must not be inside the wall.  With stride > 1 the
    outputs are (height//stride, width//stride) subsamples of the full
    image; full-resolution coordinates of grid point (i, j) are
    j*stride + (stride-1)/2 horizontally (and likewise vertically).
    """
    origin = np.asarray(tip.position, dtype=float)
    if wall_clearance(phantom, origin) <= 0.0:
        raise CameraOutsideLumen("camera origin is inside the wall")
    rot = np.asarray(tip.orientation, dtype=float)
    dirs = _cached_dirs(cam, stride) @ rot.T
    cap_pt, cap_tan = phantom._cap()
    codes, dists = _geom.march_many(
        phantom.path.segments, phantom.inner_radius, cap_pt, cap_tan,
        np.ascontiguousarray(origin), np.ascontiguousarray(dirs),
        RENDER_MAX_RANGE, True, tol, 2.0 * tol)
    h, w = cam.height // stride, cam.width // stride
    codes = codes.reshape(h, w)
    dists = dists.reshape(h, w)
    lumen = (codes == _geom.HIT_EXIT) | ((codes == _geom.HIT_WALL)
                                         & (dists > d_lumen))
    shade = np.zeros((h, w))
    # face hits shade to 0 along with misses: the exterior is unlit
    hit = (codes == _geom.HIT_WALL) | (codes == _geom.HIT_EXIT)
    shade[hit] = 255.0 * np.minimum(1.0, (_SHADE_REF / np.maximum(dists[hit], 1e-6)) ** 2)
    frame = np.rint(shade).astype(np.uint8)
    return frame, Mask(lumen.astype(np.uint8))


def corrupt(mask: Mask, cfg: NoiseConfig, rng: np.random.Generator | None = None) -> Mask:
    """Apply configured corruptions; deterministic for a given seed/stream."""
    if cfg.is_identity:
        return mask
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    px = mask.pixels.copy()
    if cfg.illumination_dropout_prob > 0.0 and rng.random() < cfg.illumination_dropout_prob:
        return Mask(np.zeros_like(px))
    if cfg.flip_prob > 0.0:
        flips = rng.random(px.shape) < cfg.flip_prob
        px = np.where(flips, 1 - px, px).astype(np.uint8)
    if cfg.occluder is not None:
        (ox, oy), orad = cfg.occluder
        ys, xs = np.ogrid[:px.shape[0], :px.shape[1]]
        px[(xs - ox) ** 2 + (ys - oy) ** 2 <= orad ** 2] = 0
    return Mask(px)


def centroid(mask: Mask) -> np.ndarray:
    """Image-moment centroid (m10/m00, m01/m00) in exact integer arithmetic."""
    ys, xs = np.nonzero(mask.pixels)
    m00 = xs.size
    if m00 == 0:
        raise NoLumen("mask has no set pixels")
    m10 = int(xs.sum(dtype=np.int64))
    m01 = int(ys.sum(dtype=np.int64))
    return np.array([m10 / m00, m01 / m00])


class TargetFilter:
    """Moving average over the last four detected points."""

    def __init__(self, window: int = 4):
        self._buf = deque(maxlen=window)

    def update(self, p) -> np.ndarray:
        self._buf.append(np.asarray(p, dtype=float))
        return self.value

    @property
    def value(self) -> np.ndarray:
        if not self._buf:
            raise NoLumen("filter has no points yet")
        return np.mean(self._buf, axis=0)

    @property
    def primed(self):
        return bool(self._buf)

    def reset(self):
        self._buf.clear()


class PerceptionBackend:
    """Pluggable lumen segmentation: three grayscale frames in, mask out."""

    def segment(self, frames) -> Mask:
        raise NotImplementedError


class GeometricBackend(PerceptionBackend):
    """Built-in backend: recovers the mask by depth-shade thresholding.

    The renderer's depth shading is monotone in distance and zero on the
    unlit exterior, so a brightness band on the newest frame inverts it
    (up to uint8 quantization at the exact boundary).
    """

    def __init__(self, d_lumen: float = D_LUMEN_DEFAULT):
        self.threshold = 255.0 * min(1.0, (_SHADE_REF / d_lumen) ** 2)

    def segment(self, frames) -> Mask:
        newest = np.asarray(frames[-1])
        return Mask(((newest > 0) & (newest < self.threshold)).astype(np.uint8))


class RemoteBackend(PerceptionBackend):
    """Client for the mask service; one synchronous request in flight."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.host = host
        self.port = port
        self.timeout = timeout
        self._sock: socket.socket | None = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            self._sock = socket.create_connection((self.host, self.port),
                                                  timeout=self.timeout)
        return self._sock

    def segment(self, frames) -> Mask:
        sock = self._connect()
        try:
            sock.sendall(protocol.pack_request(list(frames)))
            return Mask(protocol.read_response(sock))
        except (ConnectionError, OSError):
            self.close()
            raise

    def close(self):
        if self._sock is not None:
            self._sock.close()
            self._sock = None


def write_pgm(path, image) -> None:
    """Write a grayscale image or binary mask as binary PGM (P5)."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise ValueError("PGM output requires uint8 data")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError("not a binary PGM file")
    fields: list[bytes] = []
    idx = 2
    while len(fields) < 3:
        while idx < len(data) and data[idx:idx + 1].isspace():
            idx += 1
        if data[idx:idx + 1] == b"#":
            while data[idx:idx + 1] not in (b"\n", b""):
                idx += 1
            continue
        start = idx
        while idx < len(data) and not data[idx:idx + 1].isspace():
            idx += 1
        fields.append(data[start:idx])
    idx += 1
    w, h, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError("only maxval 255 supported")
    return np.frombuffer(data[idx:idx + w * h], dtype=np.uint8).reshape(h, w)
