"""Declarative description of one lambda function, JSON-serializable.

Manifest document shape (field-for-field):

    {
      "name": "roughness",
      "version": "1.0",
      "mode": {"event": {"trigger_topic": "/imu"}}
              | {"periodic": {"period_ms": 50}},
      "subscriptions": [
        {"topic": "/imu", "class": "low_volume", "depth_or_slots": 256,
         "qos": {"history_depth": 10, "reliability": "reliable"},
         "slot_size": 8388608}          # optional, high_volume only
      ],
      "params": {"start_threshold": "1.5"},
      "autostart": false,
      "entry": {"kind": "native", "ref": "imu_fft"}
              | {"kind": "guest", "ref": "pkgs/my_filter"}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ManifestError
from .ingress import DEFAULT_SLOT_SIZE, ChannelClass
from .transport import QosProfile, Reliability


@dataclass(frozen=True)
class SubscriptionSpec:
    topic: str
    clazz: ChannelClass
    depth_or_slots: int
    qos: QosProfile = QosProfile()
    slot_size: int = DEFAULT_SLOT_SIZE


@dataclass(frozen=True)
class EntrySpec:
    kind: str  # "native" | "guest"
    ref: str


@dataclass(frozen=True)
class FunctionManifest:
    name: str
    version: str = "0"
    mode: str = "event"  # "event" | "periodic"
    trigger_topic: Optional[str] = None
    period_ms: Optional[int] = None
    subscriptions: tuple[SubscriptionSpec, ...] = ()
    params: dict = field(default_factory=dict)
    autostart: bool = False
    entry: EntrySpec = EntrySpec("native", "noop")

    def validate(self) -> "FunctionManifest":
        if not self.name:
            raise ManifestError("manifest name must be non-empty")
        if self.mode == "event":
            if not self.trigger_topic:
                raise ManifestError("event mode requires a trigger_topic")
            if self.trigger_topic not in {s.topic for s in self.subscriptions}:
                raise ManifestError(
                    f"trigger topic {self.trigger_topic!r} is not among the subscriptions"
                )
        elif self.mode == "periodic":
            if self.period_ms is None or self.period_ms < 1:
                raise ManifestError("periodic mode requires period_ms >= 1")
        else:
            raise ManifestError(f"unknown mode {self.mode!r}")
        if self.entry.kind not in ("native", "guest"):
            raise ManifestError(f"unknown entry kind {self.entry.kind!r}")
        seen = set()
        for sub in self.subscriptions:
            if sub.topic in seen:
                raise ManifestError(f"duplicate subscription topic {sub.topic!r}")
            seen.add(sub.topic)
        return self

    def to_dict(self) -> dict:
        mode = (
            {"event": {"trigger_topic": self.trigger_topic}}
            if self.mode == "event"
            else {"periodic": {"period_ms": self.period_ms}}
        )
        return {
            "name": self.name,
            "version": self.version,
            "mode": mode,
            "subscriptions": [
                {
                    "topic": s.topic,
                    "class": s.clazz.value,
                    "depth_or_slots": s.depth_or_slots,
                    "qos": {
                        "history_depth": s.qos.history_depth,
                        "reliability": s.qos.reliability.name.lower(),
                    },
                    "slot_size": s.slot_size,
                }
                for s in self.subscriptions
            ],
            "params": dict(self.params),
            "autostart": self.autostart,
            "entry": {"kind": self.entry.kind, "ref": self.entry.ref},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "FunctionManifest":
        try:
            mode_doc = doc["mode"]
            if "event" in mode_doc:
                mode, trigger, period = "event", mode_doc["event"]["trigger_topic"], None
            elif "periodic" in mode_doc:
                mode, trigger, period = "periodic", None, int(mode_doc["periodic"]["period_ms"])
            else:
                raise ManifestError(f"unknown mode document {mode_doc!r}")
            subs = []
            for s in doc.get("subscriptions", []):
                qos_doc = s.get("qos", {})
                subs.append(
                    SubscriptionSpec(
                        topic=s["topic"],
                        clazz=ChannelClass(s["class"]),
                        depth_or_slots=int(s["depth_or_slots"]),
                        qos=QosProfile(
                            history_depth=int(qos_doc.get("history_depth", 10)),
                            reliability=Reliability[qos_doc.get("reliability", "reliable").upper()],
                        ),
                        slot_size=int(s.get("slot_size", DEFAULT_SLOT_SIZE)),
                    )
                )
            entry_doc = doc["entry"]
            manifest = cls(
                name=doc["name"],
                version=str(doc.get("version", "0")),
                mode=mode,
                trigger_topic=trigger,
                period_ms=period,
                subscriptions=tuple(subs),
                params={str(k): str(v) for k, v in doc.get("params", {}).items()},
                autostart=bool(doc.get("autostart", False)),
                entry=EntrySpec(entry_doc["kind"], entry_doc["ref"]),
            )
        except ManifestError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"malformed manifest: {exc}") from exc
        return manifest.validate()

    @classmethod
    def from_json(cls, text: str) -> "FunctionManifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path: str | Path) -> "FunctionManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))
