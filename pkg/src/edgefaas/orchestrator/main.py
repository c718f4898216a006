"""Edge-side orchestrator: registry sync, package staging, host supervision.

Desired states arrive over the registry link (pushed on change, sent once on
connect). Stale revisions are ignored with a log line. Package blobs are
staged content-addressed under the data root and fetched only on checksum
miss; manifests are written to disk and one host process is spawned per
function. The latest applied state is cached so that autostart functions come
up from cold without registry connectivity.
"""

from __future__ import annotations

import json
import socket
import sys
import threading
from pathlib import Path
from typing import Optional

from ..control import ControlChannel
from ..registry.store import DesiredState
from .relay import RegistryLink
from .supervisor import BackoffPolicy, Supervisor
from .sync import SyncPlan, sync_plan


class HostStatusListener:
    """Accepts host connections carrying log/status envelopes."""

    def __init__(self, on_log, on_status):
        self._on_log = on_log
        self._on_status = on_status
        self._srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._srv.bind(("127.0.0.1", 0))
        self._srv.listen(32)
        self.endpoint = f"tcp:127.0.0.1:{self._srv.getsockname()[1]}"
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _accept_loop(self):
        self._srv.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self._srv.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=self._serve, args=(ControlChannel(conn),), daemon=True).start()

    def _serve(self, chan: ControlChannel):
        try:
            while not self._stop.is_set():
                try:
                    env = chan.recv(timeout=0.5)
                except socket.timeout:
                    continue
                if env is None:
                    return
                if env.type == "log":
                    for record in env.payload.get("records", []):
                        self._on_log(record)
                elif env.type == "status":
                    self._on_status(env.payload)
        except (ConnectionError, OSError):
            pass
        finally:
            chan.close()

    def close(self):
        self._stop.set()
        self._srv.close()
        self._thread.join(timeout=2)


class Orchestrator:
    def __init__(
        self,
        data_root: str | Path,
        transport_endpoint: str,
        registry_endpoint: Optional[str] = None,
        vehicle_id: str = "vehicle",
        token: str = "",
        policy: BackoffPolicy = BackoffPolicy(),
        stop_grace_s: float = 5.0,
        instrument_rtt: bool = False,
        host_command_factory=None,
    ):
        self.data_root = Path(data_root)
        (self.data_root / "packages").mkdir(parents=True, exist_ok=True)
        (self.data_root / "manifests").mkdir(parents=True, exist_ok=True)
        self.transport_endpoint = transport_endpoint
        self.instrument_rtt = instrument_rtt
        self.applied_revision = 0
        self.host_status: dict[str, dict] = {}
        self._status_lock = threading.Lock()
        self._apply_lock = threading.Lock()
        self.listener = HostStatusListener(self._on_host_log, self._on_host_status)
        self.supervisor = Supervisor(
            host_command_factory or self._host_command,
            policy=policy,
            stop_grace_s=stop_grace_s,
        )
        self.link: Optional[RegistryLink] = None
        if registry_endpoint:
            self.link = RegistryLink(
                registry_endpoint, vehicle_id, token, self._on_desired_state
            ).start()

    # -- host process command ------------------------------------------------

    def _host_command(self, name: str, manifest_doc: dict) -> list[str]:
        manifest_path = self.data_root / "manifests" / f"{name}.json"
        return [
            sys.executable,
            "-m",
            "edgefaas",
            "host",
            "run",
            "--manifest",
            str(manifest_path),
            "--transport",
            self.transport_endpoint,
            "--orchestrator-channel",
            self.listener.endpoint,
            "--instrument-rtt",
            "true" if self.instrument_rtt else "false",
        ]

    # -- desired-state intake ----------------------------------------------------

    def _on_desired_state(self, payload: dict) -> None:
        state = DesiredState.from_dict(payload)
        try:
            self.apply_state(state)
        except Exception as exc:
            self._on_host_log(
                {"level": "error", "ts": 0, "function": "orchestrator",
                 "message": f"failed to apply revision {state.revision}: {exc}"}
            )

    def apply_state(self, state: DesiredState) -> SyncPlan:
        with self._apply_lock:
            if state.revision < self.applied_revision:
                self._on_host_log(
                    {"level": "warn", "ts": 0, "function": "orchestrator",
                     "message": f"ignoring stale revision {state.revision} < {self.applied_revision}"}
                )
                return SyncPlan(frozenset(), frozenset(), frozenset(), frozenset())
            plan = sync_plan(self._current_set(), state)
            desired = {}
            for f in state.functions:
                manifest_doc = self._stage_function(f.manifest, f.checksum)
                desired[manifest_doc["name"]] = (manifest_doc, f.checksum)
            self.supervisor.apply(desired)
            self.applied_revision = state.revision
            self._cache_state(state)
            if self.link is not None:
                self.link.ack_revision(state.revision)
            return plan

    def _current_set(self) -> dict[str, tuple[dict, str]]:
        return {
            name: (mp.manifest_doc, mp.checksum)
            for name, mp in ((n, self.supervisor.process(n)) for n in self.supervisor.states())
            if mp is not None
        }

    def _stage_function(self, manifest_doc: dict, checksum: str) -> dict:
        manifest_doc = json.loads(json.dumps(manifest_doc))  # private copy
        entry = manifest_doc.get("entry", {})
        if entry.get("kind") == "guest":
            blob_path = self.data_root / "packages" / checksum
            if not blob_path.exists():
                if self.link is None:
                    raise FileNotFoundError(f"package {checksum} not staged and no registry link")
                blob_path.write_bytes(self.link.fetch_package(checksum))
            entry["ref"] = str(blob_path)
            manifest_doc["entry"] = entry
        manifest_path = self.data_root / "manifests" / f"{manifest_doc['name']}.json"
        manifest_path.write_text(json.dumps(manifest_doc, indent=2, sort_keys=True), encoding="utf-8")
        return manifest_doc

    def _cache_state(self, state: DesiredState) -> None:
        (self.data_root / "state.json").write_text(
            json.dumps(state.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )

    def boot_offline_autostart(self) -> Optional[SyncPlan]:
        """Apply the autostart subset of the last cached state (no registry)."""
        path = self.data_root / "state.json"
        if not path.exists():
            return None
        cached = DesiredState.from_dict(json.loads(path.read_text(encoding="utf-8")))
        autostart = tuple(f for f in cached.functions if f.manifest.get("autostart"))
        return self.apply_state(DesiredState(cached.vehicle_id, cached.revision, autostart))

    # -- host feedback -------------------------------------------------------------

    def _on_host_log(self, record: dict) -> None:
        if self.link is not None:
            self.link.enqueue_log(record)

    def _on_host_status(self, payload: dict) -> None:
        with self._status_lock:
            self.host_status[payload.get("function", "?")] = payload

    def close(self) -> None:
        if self.link is not None:
            self.link.close()
        self.supervisor.close()
        self.listener.close()
