"""Road-roughness filter, guest edition: numpy FFT band energies + hysteresis."""

import numpy as np

from edgefaas_guest import decode_imu

DEFAULT_BANDS = ((0.5, 4.0), (4.0, 12.0), (12.0, 30.0))
DEFAULT_WEIGHTS = (0.2, 0.5, 0.3)

cfg = {}
recording = False
last_score = None


def _parse_bands(raw):
    return tuple((float(lo), float(hi)) for lo, _, hi in (p.partition(":") for p in raw.split(",")))


def setup(params):
    global cfg, recording, last_score
    start = float(params.get("start_threshold", 1.0))
    n = int(params.get("window_size", 256))
    cfg = {
        "window": n,
        "rate": float(params.get("sample_rate", 100.0)),
        "bands": _parse_bands(params["bands"]) if "bands" in params else DEFAULT_BANDS,
        "weights": tuple(float(w) for w in params["weights"].split(","))
        if "weights" in params
        else DEFAULT_WEIGHTS,
        "start": start,
        "stop": float(params.get("stop_threshold", 0.8 * start)),
        "topic": params.get("topic"),
        "hann": 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n),
    }
    recording = False
    last_score = None


def on_invoke(ctx):
    global recording, last_score
    records = ctx.window(cfg["topic"] or ctx.trigger_topic, cfg["window"])
    if len(records) < cfg["window"]:
        return
    z = np.array([decode_imu(r).accel[2] for r in records])
    shaped = cfg["hann"] * (z - z.mean())
    power = np.abs(np.fft.fft(shaped)) ** 2
    n = cfg["window"]
    freqs = np.arange(n) * cfg["rate"] / n
    one_sided = (np.arange(n) >= 1) & (np.arange(n) <= n // 2)
    score = 0.0
    for weight, (lo, hi) in zip(cfg["weights"], cfg["bands"]):
        score += weight * power[one_sided & (freqs >= lo) & (freqs < hi)].sum()
    last_score = float(score)
    cause = records[-1].seq
    if not recording and last_score > cfg["start"]:
        recording = True
        ctx.trigger("start_recording", label=f"roughness:{last_score:.3f}", cause_seq=cause)
    elif recording and last_score < cfg["stop"]:
        recording = False
        ctx.trigger("stop_recording", label=f"roughness:{last_score:.3f}", cause_seq=cause)
