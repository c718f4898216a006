"""Registry persistence: content-addressed packages, vehicle state, logs.

Directory layout under the data dir:

    packages/<sha256-hex>          package blob
    packages/index.json            (name, version) -> checksum/kind/template
    vehicles/<id>/state.json       deployment (DesiredState document)
    vehicles/<id>/logs/<date>.jsonl

All state mutations are serialized per store instance and flushed to disk
before the call returns, so an acknowledged operation survives a restart.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from ..errors import ChecksumMismatch, UnknownPackage, UnknownVehicle, VersionConflict

NATIVE_KIND = "native-ref"
GUEST_KIND = "guest-archive"


def sha256_hex(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def native_ref_blob(builtin: str) -> bytes:
    """Canonical blob for native-ref packages so checksums are uniform."""
    return json.dumps({"builtin": builtin}, sort_keys=True).encode("utf-8")


@dataclass(frozen=True)
class PackageMeta:
    name: str
    version: str
    checksum: str
    kind: str
    manifest_template: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "checksum": self.checksum,
            "kind": self.kind,
            "manifest_template": self.manifest_template,
        }


@dataclass(frozen=True)
class DesiredFunction:
    manifest: dict  # FunctionManifest document
    checksum: str


@dataclass(frozen=True)
class DesiredState:
    vehicle_id: str
    revision: int
    functions: tuple[DesiredFunction, ...]

    def to_dict(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "revision": self.revision,
            "functions": [{"manifest": f.manifest, "checksum": f.checksum} for f in self.functions],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DesiredState":
        return cls(
            doc["vehicle_id"],
            int(doc["revision"]),
            tuple(DesiredFunction(f["manifest"], f["checksum"]) for f in doc["functions"]),
        )


class RegistryStore:
    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        (self.root / "packages").mkdir(parents=True, exist_ok=True)
        (self.root / "vehicles").mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._index: dict[str, dict] = {}
        index_path = self.root / "packages" / "index.json"
        if index_path.exists():
            self._index = json.loads(index_path.read_text(encoding="utf-8"))

    def _flush_index(self) -> None:
        path = self.root / "packages" / "index.json"
        path.write_text(json.dumps(self._index, indent=2, sort_keys=True), encoding="utf-8")

    @staticmethod
    def _key(name: str, version: str) -> str:
        return f"{name}@{version}"

    # -- packages ----------------------------------------------------------

    def put_package(
        self,
        name: str,
        version: str,
        kind: str,
        blob: bytes,
        checksum: str,
        manifest_template: Optional[dict] = None,
    ) -> PackageMeta:
        actual = sha256_hex(blob)
        if actual != checksum:
            raise ChecksumMismatch(f"declared {checksum}, computed {actual}")
        with self._lock:
            key = self._key(name, version)
            existing = self._index.get(key)
            if existing is not None and existing["checksum"] != checksum:
                raise VersionConflict(f"{key} already stored with different bytes")
            blob_path = self.root / "packages" / checksum
            if not blob_path.exists():
                blob_path.write_bytes(blob)
            meta = PackageMeta(name, version, checksum, kind, manifest_template or {})
            self._index[key] = meta.to_dict()
            self._flush_index()
            return meta

    def get_package(self, name: str, version: str) -> PackageMeta:
        with self._lock:
            doc = self._index.get(self._key(name, version))
        if doc is None:
            raise UnknownPackage(f"{name}@{version} is not stored")
        return PackageMeta(
            doc["name"], doc["version"], doc["checksum"], doc["kind"], doc.get("manifest_template", {})
        )

    def get_blob(self, checksum: str) -> bytes:
        path = self.root / "packages" / checksum
        if not path.exists():
            raise UnknownPackage(f"no blob for checksum {checksum}")
        return path.read_bytes()

    def list_packages(self) -> list[dict]:
        with self._lock:
            return [dict(v) for v in self._index.values()]

    # -- vehicles ----------------------------------------------------------

    def _vehicle_dir(self, vehicle_id: str, create: bool = False) -> Path:
        path = self.root / "vehicles" / vehicle_id
        if create:
            (path / "logs").mkdir(parents=True, exist_ok=True)
        elif not path.exists():
            raise UnknownVehicle(f"vehicle {vehicle_id!r} has no state")
        return path

    def ensure_vehicle(self, vehicle_id: str) -> None:
        self._vehicle_dir(vehicle_id, create=True)

    def deployment(self, vehicle_id: str) -> Optional[DesiredState]:
        path = self._vehicle_dir(vehicle_id, create=True) / "state.json"
        if not path.exists():
            return None
        return DesiredState.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def set_deployment(self, vehicle_id: str, functions: list[DesiredFunction]) -> DesiredState:
        with self._lock:
            current = self.deployment(vehicle_id)
            revision = (current.revision if current else 0) + 1
            state = DesiredState(vehicle_id, revision, tuple(functions))
            path = self._vehicle_dir(vehicle_id, create=True) / "state.json"
            path.write_text(json.dumps(state.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
            return state

    def list_vehicles(self) -> list[str]:
        return sorted(p.name for p in (self.root / "vehicles").iterdir() if p.is_dir())

    # -- logs ----------------------------------------------------------------

    def append_logs(self, vehicle_id: str, records: list[dict]) -> tuple[int, list[str]]:
        """Append valid records; returns (accepted count, error details)."""
        accepted, errors = [], []
        for i, record in enumerate(records):
            if not isinstance(record, dict) or not {"level", "ts", "function", "message"} <= set(record):
                errors.append(f"record {i}: missing required fields")
                continue
            accepted.append(record)
        if accepted:
            date = datetime.now(timezone.utc).strftime("%Y-%m-%d")
            path = self._vehicle_dir(vehicle_id, create=True) / "logs" / f"{date}.jsonl"
            with self._lock, open(path, "a", encoding="utf-8") as fh:
                for record in accepted:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
        return len(accepted), errors

    def query_logs(
        self,
        vehicle_id: str,
        function: Optional[str] = None,
        level: Optional[str] = None,
        ts_from: Optional[int] = None,
        ts_to: Optional[int] = None,
    ) -> list[dict]:
        logs_dir = self._vehicle_dir(vehicle_id) / "logs"
        records = []
        for path in sorted(logs_dir.glob("*.jsonl")):
            for line in path.read_text(encoding="utf-8").splitlines():
                record = json.loads(line)
                if function is not None and record["function"] != function:
                    continue
                if level is not None and record["level"] != level:
                    continue
                if ts_from is not None and record["ts"] < ts_from:
                    continue
                if ts_to is not None and record["ts"] >= ts_to:
                    continue
                records.append(record)
        records.sort(key=lambda r: r["ts"])
        return records
