"""Server side of the mask-service wire protocol.

Stream socket, all integers big-endian:

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

MAX_DIM = 8192
FRAME_COUNT = 3


class RequestError(Exception):
    def __init__(self, code: int):
        super().__init__(f"protocol error code {code}")
        self.code = code


def read_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("socket closed mid-message")
        buf.extend(chunk)
    return bytes(buf)


def read_request(sock: socket.socket) -> list[np.ndarray]:
    """Read one request; returns 3 frames (h, w) uint8, oldest first."""
    if read_exact(sock, 4) != MAGIC:
        raise RequestError(ERR_BAD_MAGIC)
    (msg_type,) = struct.unpack(">B", read_exact(sock, 1))
    if msg_type != MSG_REQUEST:
        raise RequestError(ERR_BAD_MAGIC)
    w, h, count = struct.unpack(">IIB", read_exact(sock, 9))
    if count != FRAME_COUNT or not (0 < w <= MAX_DIM and 0 < h <= MAX_DIM):
        raise RequestError(ERR_BAD_DIMENSIONS)
    return [np.frombuffer(read_exact(sock, w * h),
                          dtype=np.uint8).reshape(h, w)
            for _ in range(count)]


def pack_response(mask: np.ndarray) -> bytes:
    h, w = mask.shape
    body = (np.ascontiguousarray(mask, dtype=np.uint8) * 255).tobytes()
    return MAGIC + struct.pack(">BII", MSG_RESPONSE, w, h) + body


def pack_error(code: int) -> bytes:
    return MAGIC + struct.pack(">BH", MSG_ERROR, code)
