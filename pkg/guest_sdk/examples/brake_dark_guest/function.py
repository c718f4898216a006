"""Brake + dark filter, guest edition: IMU braking mean and frame luminance."""

import numpy as np

from edgefaas_guest import decode_imu

cfg = {}
recording = False


def setup(params):
    global cfg, recording
    cfg = {
        "k": int(params.get("brake_samples", 10)),
        "accel": float(params.get("accel_threshold", -3.0)),
        "lum": float(params.get("luminance_threshold", 50.0)),
        "imu_topic": params.get("imu_topic"),
    }
    recording = False


def on_invoke(ctx):
    global recording
    frame = ctx.latest(ctx.trigger_topic)
    if frame is None:
        return
    imu_topic = cfg["imu_topic"] or next(t for t in ctx.topics() if t != ctx.trigger_topic)
    samples = ctx.window(imu_topic, cfg["k"])
    if len(samples) < cfg["k"]:
        return
    longitudinal = [decode_imu(r).accel[0] for r in samples]
    braking = sum(longitudinal) / len(longitudinal) <= cfg["accel"]
    dark = float(np.frombuffer(frame.data, dtype=np.uint8).mean()) < cfg["lum"]
    if braking and dark and not recording:
        recording = True
        ctx.trigger("start_recording", label="brake+dark", cause_seq=frame.seq)
    elif recording and not (braking and dark):
        recording = False
        ctx.trigger("stop_recording", label="brake+dark", cause_seq=frame.seq)
