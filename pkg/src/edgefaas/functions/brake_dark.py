"""Multi-sensor lambda: start recording while braking in the dark.

Event-driven on the camera topic; samples the IMU from its ring buffer.
Braking holds when the mean of the last K longitudinal accelerations is <=
the braking threshold; darkness when the frame's mean luminance is strictly
below the luminance threshold (byte units, 0..255). Grayscale frames average
the raw payload bytes; RGB frames use BT.601 luma per pixel.

Starts recording when both hold, stops on the first frame where the
conjunction breaks while recording.
"""

from __future__ import annotations

import numpy as np

from ..payloads import ActionKind, decode_imu_sample

DEFAULT_BRAKE_SAMPLES = 10
DEFAULT_ACCEL_THRESHOLD = -3.0  # m/s^2, longitudinal
DEFAULT_LUMINANCE_THRESHOLD = 50.0  # byte units, i.e. 50/255 of full scale

_BT601 = np.array([0.299, 0.587, 0.114])


def mean_luminance(frame: bytes | memoryview, channels: int = 1) -> float:
    """Mean luminance of raw pixel bytes in 0..255."""
    pixels = np.frombuffer(frame, dtype=np.uint8)
    if channels == 1:
        return float(pixels.mean())
    if channels == 3:
        usable = len(pixels) - len(pixels) % 3
        rgb = pixels[:usable].astype(np.float64).reshape(-1, 3)
        return float((rgb @ _BT601).mean())
    raise ValueError(f"unsupported channel count {channels}")


class BrakeDarkLambda:
    def setup(self, params: dict) -> None:
        self.brake_samples = int(params.get("brake_samples", DEFAULT_BRAKE_SAMPLES))
        self.accel_threshold = float(params.get("accel_threshold", DEFAULT_ACCEL_THRESHOLD))
        self.luminance_threshold = float(
            params.get("luminance_threshold", DEFAULT_LUMINANCE_THRESHOLD)
        )
        self.channels = int(params.get("channels", 1))
        self.imu_topic = params.get("imu_topic")
        self.recording = False

    def _imu_topic(self, ctx) -> str:
        if self.imu_topic:
            return self.imu_topic
        for topic in ctx.topics():
            if topic != ctx.trigger_topic:
                return topic
        raise ValueError("no IMU subscription available")

    def on_invoke(self, ctx) -> None:
        frame = ctx.latest(ctx.trigger_topic)
        if frame is None:
            return
        samples = ctx.window(self._imu_topic(ctx), self.brake_samples)
        if len(samples) < self.brake_samples:
            return
        longitudinal = [decode_imu_sample(r.source_ts, r.payload).accel[0] for r in samples]
        braking = sum(longitudinal) / len(longitudinal) <= self.accel_threshold
        dark = mean_luminance(frame.view(), self.channels) < self.luminance_threshold
        if braking and dark and not self.recording:
            self.recording = True
            ctx.trigger(ActionKind.START_RECORDING, label="brake+dark", cause_seq=frame.seq)
        elif self.recording and not (braking and dark):
            self.recording = False
            ctx.trigger(ActionKind.STOP_RECORDING, label="brake+dark", cause_seq=frame.seq)
