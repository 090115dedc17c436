"""Mask-service wire protocol (stream socket, big-endian integers).

Request:  b"LSRV" | 0x01 | width u32 | height u32 | frame_count u8 (=3)
          | frame_count*width*height bytes grayscale, oldest frame first
Response: b"LSRV" | 0x81 | width u32 | height u32 | width*height mask bytes,
          values in {0, 255}
Error:    b"LSRV" | 0xFF | code u16   (1 bad magic, 2 bad dimensions,
          3 internal)
"""

from __future__ import annotations

import socket
import struct

import numpy as np

MAGIC = b"LSRV"
MSG_REQUEST = 0x01
MSG_RESPONSE = 0x81
MSG_ERROR = 0xFF

ERR_BAD_MAGIC = 1
ERR_BAD_DIMENSIONS = 2
ERR_INTERNAL = 3


class ProtocolError(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message or f"mask service error code {code}")
        self.code = code


def pack_request(frames) -> bytes:
    """Serialize the last three grayscale frames, oldest first."""
    if len(frames) != 3:
        raise ValueError("exactly three frames required")
    h, w = frames[0].shape
    parts = [MAGIC, struct.pack(">BIIB", MSG_REQUEST, w, h, 3)]
    for f in frames:
        if f.shape != (h, w):
            raise ValueError("frame dimensions differ")
        parts.append(np.ascontiguousarray(f, dtype=np.uint8).tobytes())
    return b"".join(parts)


def pack_response(mask) -> bytes:
    h, w = mask.shape
    body = (np.ascontiguousarray(mask, dtype=np.uint8) * 255
            if mask.max(initial=0) <= 1 else np.ascontiguousarray(mask, dtype=np.uint8))
    return MAGIC + struct.pack(">BII", MSG_RESPONSE, w, h) + body.tobytes()


def pack_error(code: int) -> bytes:
    return MAGIC + struct.pack(">BH", MSG_ERROR, code)


def read_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("socket closed mid-message")
        buf.extend(chunk)
    return bytes(buf)


def read_response(sock: socket.socket) -> np.ndarray:
    """Read one server reply; returns a binary {0,1} mask array (h, w)."""
    magic = read_exact(sock, 4)
    if magic != MAGIC:
        raise ProtocolError(ERR_BAD_MAGIC, "bad magic in reply")
    (msg_type,) = struct.unpack(">B", read_exact(sock, 1))
    if msg_type == MSG_ERROR:
        (code,) = struct.unpack(">H", read_exact(sock, 2))
        raise ProtocolError(code)
    if msg_type != MSG_RESPONSE:
        raise ProtocolError(ERR_INTERNAL, f"unexpected msg type {msg_type:#x}")
    w, h = struct.unpack(">II", read_exact(sock, 8))
    raw = np.frombuffer(read_exact(sock, w * h), dtype=np.uint8)
    return (raw.reshape(h, w) >= 128).astype(np.uint8)


def read_request(sock: socket.socket):
    """Server side: read one request, returning a list of 3 frames (h, w).

    Raises ProtocolError with the wire error code on malformed input.
    """
    magic = read_exact(sock, 4)
    if magic != MAGIC:
        raise ProtocolError(ERR_BAD_MAGIC)
    (msg_type,) = struct.unpack(">B", read_exact(sock, 1))
    if msg_type != MSG_REQUEST:
        raise ProtocolError(ERR_BAD_MAGIC)
    w, h, count = struct.unpack(">IIB", read_exact(sock, 9))
    if count != 3 or w == 0 or h == 0 or w > 8192 or h > 8192:
        raise ProtocolError(ERR_BAD_DIMENSIONS)
    frames = []
    for _ in range(count):
        raw = np.frombuffer(read_exact(sock, w * h), dtype=np.uint8)
        frames.append(raw.reshape(h, w))
    return frames
