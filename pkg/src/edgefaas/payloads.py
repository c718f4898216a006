"""Payload encodings for the envelope types that cross the data plane.

IMU samples are 48 bytes: six little-endian f64 (accel xyz, gyro xyz); the
sample timestamp rides in the envelope's source_ts. Axis convention: x is
longitudinal (forward-positive), z is vertical.

Camera frames are raw pixel bytes. Frames meant for the mock detector carry a
detection block in their leading bytes:

    4 bytes   magic b"MDET"
    u32 LE    box count k
    k * 24B   x1, y1, x2, y2 (f32 LE), class id (u32 LE), confidence (f32 LE)

Trigger actions, RTT records and log records are UTF-8 JSON objects.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional

_IMU = struct.Struct("<6d")

DETECTION_MAGIC = b"MDET"
_DET_HEADER = struct.Struct("<4sI")
_DET_BOX = struct.Struct("<4fIf")

ACTIONS_TOPIC = "/lambda/actions"
RTT_TOPIC = "/lambda/rtt"

LOG_MESSAGE_CAP = 4096
LOG_TRUNCATION_MARKER = "...[truncated]"


@dataclass(frozen=True)
class ImuSample:
    ts: int
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float] = (0.0, 0.0, 0.0)


def encode_imu_sample(accel, gyro=(0.0, 0.0, 0.0)) -> bytes:
    return _IMU.pack(*accel, *gyro)


def decode_imu_sample(source_ts: int, payload: bytes) -> ImuSample:
    ax, ay, az, gx, gy, gz = _IMU.unpack(payload)
    return ImuSample(source_ts, (ax, ay, az), (gx, gy, gz))


def encode_detection_block(boxes) -> bytes:
    """boxes: iterable of (x1, y1, x2, y2, class_id, confidence)."""
    parts = [_DET_HEADER.pack(DETECTION_MAGIC, len(boxes))]
    for x1, y1, x2, y2, cls, conf in boxes:
        parts.append(_DET_BOX.pack(x1, y1, x2, y2, int(cls), conf))
    return b"".join(parts)


def decode_detection_block(payload: bytes) -> list[tuple[float, float, float, float, int, float]]:
    """Decode the leading detection block; empty list when no magic present."""
    if len(payload) < _DET_HEADER.size:
        return []
    magic, count = _DET_HEADER.unpack_from(payload, 0)
    if magic != DETECTION_MAGIC:
        return []
    boxes = []
    off = _DET_HEADER.size
    for _ in range(count):
        if off + _DET_BOX.size > len(payload):
            break
        x1, y1, x2, y2, cls, conf = _DET_BOX.unpack_from(payload, off)
        boxes.append((x1, y1, x2, y2, cls, conf))
        off += _DET_BOX.size
    return boxes


class ActionKind(str, Enum):
    START_RECORDING = "start_recording"
    STOP_RECORDING = "stop_recording"
    MARK = "mark"


@dataclass(frozen=True)
class TriggerAction:
    action: ActionKind
    label: str
    decision_ts: int
    function: str
    cause_seq: Optional[int] = None

    def to_json(self) -> bytes:
        return json.dumps(
            {
                "action": self.action.value,
                "label": self.label,
                "decision_ts": self.decision_ts,
                "function": self.function,
                "cause_seq": self.cause_seq,
            }
        ).encode("utf-8")

    @classmethod
    def from_json(cls, payload: bytes) -> "TriggerAction":
        d = json.loads(payload.decode("utf-8"))
        return cls(
            ActionKind(d["action"]), d["label"], d["decision_ts"], d["function"], d.get("cause_seq")
        )


@dataclass(frozen=True)
class RttRecord:
    function: str
    cause_seq: Optional[int]
    t_in: int
    t_out: int

    @property
    def rtt_ms(self) -> float:
        return (self.t_out - self.t_in) / 1e6

    def to_json(self) -> bytes:
        return json.dumps(
            {"function": self.function, "cause_seq": self.cause_seq, "t_in": self.t_in, "t_out": self.t_out}
        ).encode("utf-8")

    @classmethod
    def from_json(cls, payload: bytes) -> "RttRecord":
        d = json.loads(payload.decode("utf-8"))
        return cls(d["function"], d.get("cause_seq"), d["t_in"], d["t_out"])


class LogLevel(str, Enum):
    DEBUG = "debug"
    INFO = "info"
    WARN = "warn"
    ERROR = "error"


@dataclass(frozen=True)
class LogRecord:
    level: LogLevel
    ts: int
    function: str
    message: str

    @classmethod
    def make(cls, level: LogLevel, ts: int, function: str, message: str) -> "LogRecord":
        if len(message) > LOG_MESSAGE_CAP:
            message = message[: LOG_MESSAGE_CAP - len(LOG_TRUNCATION_MARKER)] + LOG_TRUNCATION_MARKER
        return cls(level, ts, function, message)

    def to_dict(self) -> dict:
        return {"level": self.level.value, "ts": self.ts, "function": self.function, "message": self.message}

    @classmethod
    def from_dict(cls, d: dict) -> "LogRecord":
        return cls(LogLevel(d["level"]), d["ts"], d["function"], d["message"])
