"""Operator client for the registry's request/response listener."""

from __future__ import annotations

import base64
import socket
from typing import Optional

from ..control import ControlChannel, ControlEnvelope
from ..errors import AuthFailed, RegistryError
from .store import sha256_hex


def _connect(endpoint: str) -> socket.socket:
    if endpoint.startswith("tcp:"):
        host, _, port = endpoint[4:].rpartition(":")
        sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=5)
    else:
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        sock.connect(endpoint)
    return sock


class OperatorClient:
    def __init__(self, endpoint: str, user: str, token: str):
        self._chan = ControlChannel(_connect(endpoint))
        self._next_id = 1
        self._chan.send(ControlEnvelope("hello", 0, {"user": user, "token": token}))
        reply = self._chan.recv(timeout=5)
        if reply is None or reply.payload.get("error") == "auth-failed":
            raise AuthFailed(f"registry rejected user {user!r}")

    def _request(self, type_: str, payload: dict) -> dict:
        env = ControlEnvelope(type_, self._next_id, payload)
        self._next_id += 1
        self._chan.send(env)
        reply = self._chan.recv(timeout=30)
        if reply is None:
            raise RegistryError("registry closed the connection")
        error = reply.payload.get("error")
        if error:
            raise RegistryError(error)
        return reply.payload

    def put_package(
        self,
        name: str,
        version: str,
        blob: bytes,
        kind: str = "guest-archive",
        manifest_template: Optional[dict] = None,
    ) -> dict:
        return self._request(
            "put_package",
            {
                "name": name,
                "version": version,
                "kind": kind,
                "blob_b64": base64.b64encode(blob).decode("ascii"),
                "checksum": sha256_hex(blob),
                "manifest_template": manifest_template or {},
            },
        )["stored"]

    def set_deployment(self, vehicle_id: str, functions: list[dict]) -> int:
        """functions: [{"name", "version", "manifest_overrides"?, "autostart"?}]"""
        return self._request("set_deployment", {"vehicle_id": vehicle_id, "functions": functions})[
            "revision"
        ]

    def query_logs(self, vehicle_id: str, **filters) -> list[dict]:
        return self._request("query_logs", {"vehicle_id": vehicle_id, **filters})["records"]

    def list(self) -> dict:
        return self._request("list", {})

    def close(self) -> None:
        self._chan.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
