"""Long-running mask service: wire-protocol requests -> thresholded masks.

Connections are handled concurrently (thread per connection) but inference
is serialized per model instance; one request is in flight per connection.
"""

from __future__ import annotations

import socket
import threading

import numpy as np
import torch

from . import protocol
from .model import DualBranchNet


@torch.no_grad()
def infer_mask(model: DualBranchNet, frames) -> np.ndarray:
    """Offline inference: soft mask thresholded at 0.5 -> {0, 1} uint8.

    The served reply is bit-identical to this function's output.
    """
    x = torch.from_numpy(np.stack(frames)).float().unsqueeze(0) / 255.0
    pred = model(x)[0]
    return (pred >= 0.5).numpy().astype(np.uint8)


class MaskServer:
    def __init__(self, model: DualBranchNet, host: str = "127.0.0.1",
                 port: int = 7070):
        self.model = model
        self.model.eval()
        self._lock = threading.Lock()
        self._sock = socket.create_server((host, port))
        self.host, self.port = self._sock.getsockname()[:2]
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def _handle(self, conn: socket.socket):
        with conn:
            while not self._stop.is_set():
                try:
                    frames = protocol.read_request(conn)
                except protocol.RequestError as exc:
                    try:
                        conn.sendall(protocol.pack_error(exc.code))
                    except OSError:
                        pass
                    return
                except (ConnectionError, OSError):
                    return
                try:
                    with self._lock:
                        mask = infer_mask(self.model, frames)
                    reply = protocol.pack_response(mask)
                except Exception:
                    reply = protocol.pack_error(protocol.ERR_INTERNAL)
                try:
                    conn.sendall(reply)
                except OSError:
                    return

    def serve_forever(self):
        """Accept connections until close() is called."""
        self._sock.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            t = threading.Thread(target=self._handle, args=(conn,),
                                 daemon=True)
            t.start()
            self._threads.append(t)

    def start(self) -> threading.Thread:
        """Run serve_forever on a background thread; returns the thread."""
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t

    def close(self):
        self._stop.set()
        self._sock.close()


def serve(model: DualBranchNet, host: str = "127.0.0.1",
          port: int = 7070) -> None:
    """Blocking entry point used by the CLI."""
    server = MaskServer(model, host, port)
    print(f"mask service listening on {server.host}:{server.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
