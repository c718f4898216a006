"""Deterministic synthetic bags for tests and benchmarks.

IMU profiles: "smooth" is low-amplitude white noise on all axes; "rough" adds
a band-limited vertical sine (default 18 Hz) strong enough to dominate the
band-energy score. Each IMU segment can hold a constant longitudinal
acceleration (braking). Camera segments set a constant base brightness with
mild pixel noise and may embed mock-detector boxes into the frame's leading
bytes.

Given the same spec and seed, the produced bag is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..payloads import encode_detection_block, encode_imu_sample
from ..transport import ContentType
from .bag import BagTopic, BagWriter

DEFAULT_IMU_TOPIC = "/imu"
DEFAULT_CAMERA_TOPIC = "/camera"


@dataclass(frozen=True)
class ImuSegment:
    duration_s: float
    profile: str = "smooth"  # "smooth" | "rough"
    accel_x: float = 0.0
    rough_freq_hz: float = 18.0
    rough_amplitude: float = 2.0
    noise: float = 0.05


@dataclass(frozen=True)
class BoxSpec:
    x1: float
    y1: float
    x2: float
    y2: float
    class_id: int
    confidence: float


@dataclass(frozen=True)
class CameraSegment:
    duration_s: float
    brightness: int = 128
    boxes: tuple[BoxSpec, ...] = ()


@dataclass(frozen=True)
class SynthSpec:
    imu_rate_hz: float = 100.0
    imu_topic: str = DEFAULT_IMU_TOPIC
    imu_segments: tuple[ImuSegment, ...] = ()
    camera_rate_hz: float = 10.0
    camera_topic: str = DEFAULT_CAMERA_TOPIC
    camera_width: int = 64
    camera_height: int = 64
    camera_channels: int = 1
    camera_segments: tuple[CameraSegment, ...] = ()

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        imu = doc.get("imu", {})
        cam = doc.get("camera", {})
        return cls(
            imu_rate_hz=float(imu.get("rate_hz", 100.0)),
            imu_topic=imu.get("topic", DEFAULT_IMU_TOPIC),
            imu_segments=tuple(
                ImuSegment(
                    duration_s=float(s["duration_s"]),
                    profile=s.get("profile", "smooth"),
                    accel_x=float(s.get("accel_x", 0.0)),
                    rough_freq_hz=float(s.get("rough_freq_hz", 18.0)),
                    rough_amplitude=float(s.get("rough_amplitude", 2.0)),
                    noise=float(s.get("noise", 0.05)),
                )
                for s in imu.get("segments", [])
            ),
            camera_rate_hz=float(cam.get("rate_hz", 10.0)),
            camera_topic=cam.get("topic", DEFAULT_CAMERA_TOPIC),
            camera_width=int(cam.get("width", 64)),
            camera_height=int(cam.get("height", 64)),
            camera_channels=int(cam.get("channels", 1)),
            camera_segments=tuple(
                CameraSegment(
                    duration_s=float(s["duration_s"]),
                    brightness=int(s.get("brightness", 128)),
                    boxes=tuple(
                        BoxSpec(
                            float(b["x1"]),
                            float(b["y1"]),
                            float(b["x2"]),
                            float(b["y2"]),
                            int(b["class_id"]),
                            float(b["confidence"]),
                        )
                        for b in s.get("boxes", [])
                    ),
                )
                for s in cam.get("segments", [])
            ),
        )

    @classmethod
    def from_json_file(cls, path: str | Path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _imu_records(spec: SynthSpec, rng: np.random.Generator):
    dt_ns = int(1e9 / spec.imu_rate_hz)
    t_ns = 0
    for seg in spec.imu_segments:
        count = int(round(seg.duration_s * spec.imu_rate_hz))
        for i in range(count):
            t = t_ns / 1e9
            az = float(rng.normal(0.0, seg.noise))
            if seg.profile == "rough":
                az += seg.rough_amplitude * np.sin(2 * np.pi * seg.rough_freq_hz * t)
            ax = seg.accel_x + float(rng.normal(0.0, seg.noise))
            ay = float(rng.normal(0.0, seg.noise))
            yield t_ns, encode_imu_sample((ax, ay, float(az)))
            t_ns += dt_ns


def _camera_records(spec: SynthSpec, rng: np.random.Generator):
    dt_ns = int(1e9 / spec.camera_rate_hz)
    pixel_count = spec.camera_width * spec.camera_height * spec.camera_channels
    t_ns = 0
    for seg in spec.camera_segments:
        count = int(round(seg.duration_s * spec.camera_rate_hz))
        for _ in range(count):
            noise = rng.integers(-5, 6, size=pixel_count)
            pixels = np.clip(seg.brightness + noise, 0, 255).astype(np.uint8)
            frame = bytearray(pixels.tobytes())
            if seg.boxes:
                block = encode_detection_block(
                    [(b.x1, b.y1, b.x2, b.y2, b.class_id, b.confidence) for b in seg.boxes]
                )
                frame[: len(block)] = block
            yield t_ns, bytes(frame)
            t_ns += dt_ns


def synth_bag(spec: SynthSpec, seed: int, path: str | Path) -> Path:
    """Write a deterministic bag; returns the path."""
    if not spec.imu_segments and not spec.camera_segments:
        raise ValueError("synth spec has no segments")
    rng = np.random.default_rng(seed)
    topics = []
    streams = []
    if spec.imu_segments:
        topics.append(BagTopic(spec.imu_topic, ContentType.IMU_SAMPLE, {"rate_hz": spec.imu_rate_hz}))
        streams.append((len(topics) - 1, list(_imu_records(spec, rng))))
    if spec.camera_segments:
        topics.append(
            BagTopic(
                spec.camera_topic,
                ContentType.IMAGE_FRAME,
                {
                    "height": spec.camera_height,
                    "width": spec.camera_width,
                    "channels": spec.camera_channels,
                    "rate_hz": spec.camera_rate_hz,
                },
            )
        )
        streams.append((len(topics) - 1, list(_camera_records(spec, rng))))
    merged = sorted(
        ((ts, idx, payload) for idx, records in streams for ts, payload in records),
        key=lambda item: (item[0], item[1]),
    )
    path = Path(path)
    with BagWriter(path, topics) as writer:
        for ts, idx, payload in merged:
            writer.append(idx, ts, payload)
    return path
