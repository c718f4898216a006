"""Length-prefixed JSON control envelopes (orchestrator/registry/host links).

Wire format: u32 LE body length, then one UTF-8 JSON object
{"type": ..., "id": ..., "payload": {...}}.

Core envelope types: hello, desired_state, ack, log, status, heartbeat.
The vehicle channel adds fetch_package (blob download on checksum miss); the
operator listener reuses the same format with request types put_package,
set_deployment, query_logs, list. The set is deliberately extensible.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
from dataclasses import dataclass, field

_HEADER = struct.Struct("<I")
MAX_CONTROL_BODY = 64 * 1024 * 1024


@dataclass(frozen=True)
class ControlEnvelope:
    type: str
    id: int = 0
    payload: dict = field(default_factory=dict)

    def encode(self) -> bytes:
        body = json.dumps({"type": self.type, "id": self.id, "payload": self.payload}).encode("utf-8")
        return _HEADER.pack(len(body)) + body

    @classmethod
    def decode(cls, body: bytes) -> "ControlEnvelope":
        doc = json.loads(body.decode("utf-8"))
        return cls(doc["type"], int(doc.get("id", 0)), doc.get("payload", {}))


class ControlChannel:
    """One stream socket carrying control envelopes; sends are serialized."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._send_lock = threading.Lock()

    def send(self, env: ControlEnvelope) -> None:
        data = env.encode()
        with self._send_lock:
            self._sock.sendall(data)

    def recv(self, timeout: float | None = None) -> ControlEnvelope | None:
        """Next envelope; None on clean EOF. Raises socket.timeout on timeout."""
        self._sock.settimeout(timeout)
        header = self._recv_exact(_HEADER.size)
        if header is None:
            return None
        (length,) = _HEADER.unpack(header)
        if length > MAX_CONTROL_BODY:
            raise ConnectionError(f"control envelope of {length} bytes exceeds limit")
        body = self._recv_exact(length)
        if body is None:
            raise ConnectionError("connection closed mid-envelope")
        return ControlEnvelope.decode(body)

    def _recv_exact(self, n: int) -> bytes | None:
        chunks = []
        got = 0
        while got < n:
            chunk = self._sock.recv(n - got)
            if not chunk:
                if got == 0:
                    return None
                raise ConnectionError("connection closed mid-envelope")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
