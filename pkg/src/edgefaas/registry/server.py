"""Registry server: vehicle control channel and operator request listener.

Both listeners speak length-prefixed JSON ControlEnvelopes. The first
envelope on any connection must be a hello carrying the caller's token;
authentication fails closed. Tokens live in a JSON file

    {"users": {"alice": "<sha256 of token>"},
     "vehicles": {"veh-1": "<sha256 of token>"}}

and only their SHA-256 hashes are ever stored.

Vehicle channel: hello -> desired_state push (current revision, if any),
then log/status/heartbeat envelopes inbound, ack for applied revisions,
fetch_package requests answered with the blob. set_deployment from the
operator side pushes a fresh desired_state to the vehicle if connected.
"""

from __future__ import annotations

import base64
import hashlib
import json
import socket
import threading
from pathlib import Path
from typing import Optional

from ..control import ControlChannel, ControlEnvelope
from ..errors import RegistryError, UnknownPackage, UnknownVehicle
from .store import DesiredFunction, RegistryStore


def hash_token(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


class TokenFile:
    def __init__(self, path: str | Path):
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        self.users: dict[str, str] = doc.get("users", {})
        self.vehicles: dict[str, str] = doc.get("vehicles", {})

    def check_user(self, user: str, token: str) -> bool:
        return self.users.get(user) == hash_token(token)

    def check_vehicle(self, vehicle_id: str, token: str) -> bool:
        return self.vehicles.get(vehicle_id) == hash_token(token)

    @staticmethod
    def write(path: str | Path, users: dict[str, str], vehicles: dict[str, str]) -> None:
        doc = {
            "users": {u: hash_token(t) for u, t in users.items()},
            "vehicles": {v: hash_token(t) for v, t in vehicles.items()},
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


def _listen(endpoint: str) -> socket.socket:
    if endpoint.startswith("tcp:"):
        host, _, port = endpoint[4:].rpartition(":")
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host or "127.0.0.1", int(port)))
    else:
        srv = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        Path(endpoint).unlink(missing_ok=True)
        srv.bind(endpoint)
    srv.listen(16)
    return srv


def _endpoint_of(srv: socket.socket, requested: str) -> str:
    if requested.startswith("tcp:"):
        host = requested[4:].rpartition(":")[0] or "127.0.0.1"
        return f"tcp:{host}:{srv.getsockname()[1]}"
    return requested


class RegistryServer:
    def __init__(
        self,
        store: RegistryStore,
        tokens: TokenFile,
        vehicles_endpoint: str = "tcp:127.0.0.1:0",
        ops_endpoint: str = "tcp:127.0.0.1:0",
    ):
        self.store = store
        self.tokens = tokens
        self._stop = threading.Event()
        self._vehicle_channels: dict[str, ControlChannel] = {}
        self._vehicle_lock = threading.Lock()
        self._srv_vehicles = _listen(vehicles_endpoint)
        self._srv_ops = _listen(ops_endpoint)
        self.vehicles_endpoint = _endpoint_of(self._srv_vehicles, vehicles_endpoint)
        self.ops_endpoint = _endpoint_of(self._srv_ops, ops_endpoint)
        self._threads = [
            threading.Thread(target=self._accept_loop, args=(self._srv_vehicles, self._serve_vehicle), daemon=True),
            threading.Thread(target=self._accept_loop, args=(self._srv_ops, self._serve_ops), daemon=True),
        ]
        for t in self._threads:
            t.start()

    # -- plumbing -------------------------------------------------------------

    def _accept_loop(self, srv: socket.socket, handler) -> None:
        srv.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = srv.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=handler, args=(ControlChannel(conn),), daemon=True).start()

    def close(self) -> None:
        self._stop.set()
        self._srv_vehicles.close()
        self._srv_ops.close()
        with self._vehicle_lock:
            for chan in self._vehicle_channels.values():
                chan.close()
            self._vehicle_channels.clear()
        for t in self._threads:
            t.join(timeout=2)

    # -- vehicle channel ---------------------------------------------------------

    def _serve_vehicle(self, chan: ControlChannel) -> None:
        vehicle_id: Optional[str] = None
        try:
            hello = chan.recv(timeout=5)
            if hello is None or hello.type != "hello":
                return
            vehicle_id = hello.payload.get("vehicle_id", "")
            token = hello.payload.get("token", "")
            if not self.tokens.check_vehicle(vehicle_id, token):
                chan.send(ControlEnvelope("ack", hello.id, {"error": "auth-failed"}))
                return
            self.store.ensure_vehicle(vehicle_id)
            with self._vehicle_lock:
                self._vehicle_channels[vehicle_id] = chan
            chan.send(ControlEnvelope("ack", hello.id, {"ok": True}))
            deployment = self.store.deployment(vehicle_id)
            if deployment is not None:
                chan.send(ControlEnvelope("desired_state", payload=deployment.to_dict()))
            while not self._stop.is_set():
                try:
                    env = chan.recv(timeout=0.5)
                except socket.timeout:
                    continue
                if env is None:
                    return
                self._handle_vehicle_envelope(chan, vehicle_id, env)
        except (ConnectionError, OSError):
            pass
        finally:
            if vehicle_id is not None:
                with self._vehicle_lock:
                    if self._vehicle_channels.get(vehicle_id) is chan:
                        del self._vehicle_channels[vehicle_id]

    def _handle_vehicle_envelope(self, chan: ControlChannel, vehicle_id: str, env: ControlEnvelope) -> None:
        if env.type == "log":
            count, errors = self.store.append_logs(vehicle_id, env.payload.get("records", []))
            chan.send(ControlEnvelope("ack", env.id, {"accepted": count, "errors": errors}))
        elif env.type == "fetch_package":
            try:
                blob = self.store.get_blob(env.payload["checksum"])
                chan.send(
                    ControlEnvelope(
                        "ack", env.id, {"blob_b64": base64.b64encode(blob).decode("ascii")}
                    )
                )
            except UnknownPackage as exc:
                chan.send(ControlEnvelope("ack", env.id, {"error": str(exc)}))
        elif env.type in ("status", "heartbeat", "ack"):
            pass  # recorded nowhere yet; acks carry applied revisions
        else:
            chan.send(ControlEnvelope("ack", env.id, {"error": f"unknown type {env.type}"}))

    def push_desired_state(self, vehicle_id: str) -> bool:
        deployment = self.store.deployment(vehicle_id)
        if deployment is None:
            return False
        with self._vehicle_lock:
            chan = self._vehicle_channels.get(vehicle_id)
        if chan is None:
            return False
        try:
            chan.send(ControlEnvelope("desired_state", payload=deployment.to_dict()))
            return True
        except (ConnectionError, OSError):
            return False

    def connected_vehicles(self) -> list[str]:
        with self._vehicle_lock:
            return sorted(self._vehicle_channels)

    # -- operator channel -----------------------------------------------------------

    def _serve_ops(self, chan: ControlChannel) -> None:
        try:
            hello = chan.recv(timeout=5)
            if hello is None or hello.type != "hello":
                return
            user = hello.payload.get("user", "")
            token = hello.payload.get("token", "")
            if not self.tokens.check_user(user, token):
                chan.send(ControlEnvelope("ack", hello.id, {"error": "auth-failed"}))
                return
            chan.send(ControlEnvelope("ack", hello.id, {"ok": True}))
            while not self._stop.is_set():
                try:
                    env = chan.recv(timeout=0.5)
                except socket.timeout:
                    continue
                if env is None:
                    return
                chan.send(ControlEnvelope("ack", env.id, self._handle_ops_request(env)))
        except (ConnectionError, OSError):
            pass

    def _handle_ops_request(self, env: ControlEnvelope) -> dict:
        try:
            if env.type == "put_package":
                p = env.payload
                meta = self.store.put_package(
                    p["name"],
                    p["version"],
                    p.get("kind", "guest-archive"),
                    base64.b64decode(p.get("blob_b64", "")),
                    p["checksum"],
                    p.get("manifest_template"),
                )
                return {"stored": meta.to_dict()}
            if env.type == "set_deployment":
                return {"revision": self._apply_deployment(env.payload)}
            if env.type == "query_logs":
                p = env.payload
                records = self.store.query_logs(
                    p["vehicle_id"],
                    p.get("function"),
                    p.get("level"),
                    p.get("ts_from"),
                    p.get("ts_to"),
                )
                return {"records": records}
            if env.type == "list":
                return {
                    "packages": self.store.list_packages(),
                    "vehicles": self.store.list_vehicles(),
                }
            return {"error": f"unknown type {env.type}"}
        except (RegistryError, KeyError, ValueError) as exc:
            kind = type(exc).__name__ if isinstance(exc, RegistryError) else "bad-request"
            return {"error": f"{kind}: {exc}"}

    def _apply_deployment(self, payload: dict) -> int:
        vehicle_id = payload["vehicle_id"]
        if vehicle_id not in self.tokens.vehicles:
            raise UnknownVehicle(f"vehicle {vehicle_id!r} is not registered")
        functions = []
        for f in payload["functions"]:
            meta = self.store.get_package(f["name"], f["version"])  # UnknownPackage on miss
            manifest = dict(meta.manifest_template)
            manifest.update(f.get("manifest_overrides", {}))
            manifest.setdefault("name", meta.name)
            if "autostart" in f:
                manifest["autostart"] = bool(f["autostart"])
            functions.append(DesiredFunction(manifest, meta.checksum))
        state = self.store.set_deployment(vehicle_id, functions)
        self.push_desired_state(vehicle_id)
        return state.revision
