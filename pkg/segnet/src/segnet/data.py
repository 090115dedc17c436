"""Dataset loading for simulator-rendered segmentation samples.

The dataset directory layout is the simulator's: an ``index.json`` listing
samples, each with three PGM frame paths (oldest first) and one PGM mask.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM with maxval <= 255."""
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos] in b" \t\r\n":
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in b" \t\r\n":
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit PGM not supported")
    pos += 1    # single whitespace after maxval
    px = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return px.reshape(h, w)


@dataclass(frozen=True)
class SegSample:
    frames: np.ndarray     # (n_frames, h, w) uint8, oldest first
    mask: np.ndarray       # (h, w) uint8 in {0, 1}
    sample_id: int
    path_id: str

    def __post_init__(self):
        if self.frames.shape[1:] != self.mask.shape:
            raise ValueError("frame and mask dimensions differ")
        if self.mask.max(initial=0) > 1:
            raise ValueError("mask must be binary")


def load_dataset(data_dir) -> list[SegSample]:
    root = Path(data_dir)
    index = json.loads((root / "index.json").read_text())
    samples = []
    for entry in index["samples"]:
        frames = np.stack([read_pgm(root / rel) for rel in entry["frames"]])
        mask = (read_pgm(root / entry["mask"]) >= 128).astype(np.uint8)
        samples.append(SegSample(frames=frames, mask=mask,
                                 sample_id=int(entry["id"]),
                                 path_id=str(entry["path"])))
    return samples
