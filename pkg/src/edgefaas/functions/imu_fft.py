"""Road-roughness lambda: band-energy score over IMU windows with hysteresis.

Event-driven on the IMU topic. Emits start_recording when the score crosses
strictly above the start threshold while idle, stop_recording when it falls
strictly below the stop threshold while recording; at most one action per
invocation. No-op until a full window of samples has arrived.
"""

from __future__ import annotations

from ..payloads import ActionKind, decode_imu_sample
from .dsp import RoughnessConfig, roughness_score


def _parse_bands(raw: str) -> tuple[tuple[float, float], ...]:
    # "0.5:4,4:12,12:30" -> ((0.5, 4.0), (4.0, 12.0), (12.0, 30.0))
    out = []
    for part in raw.split(","):
        lo, _, hi = part.partition(":")
        out.append((float(lo), float(hi)))
    return tuple(out)


def config_from_params(params: dict) -> RoughnessConfig:
    defaults = RoughnessConfig()
    start = float(params.get("start_threshold", defaults.start_threshold))
    stop = float(params.get("stop_threshold", 0.8 * start))
    return RoughnessConfig(
        window_size=int(params.get("window_size", defaults.window_size)),
        sample_rate=float(params.get("sample_rate", defaults.sample_rate)),
        bands=_parse_bands(params["bands"]) if "bands" in params else defaults.bands,
        weights=tuple(float(w) for w in params["weights"].split(","))
        if "weights" in params
        else defaults.weights,
        start_threshold=start,
        stop_threshold=stop,
    )


class ImuFftLambda:
    def setup(self, params: dict) -> None:
        self.cfg = config_from_params(params)
        self.topic = params.get("topic")
        self.recording = False
        self.last_score: float | None = None

    def on_invoke(self, ctx) -> None:
        topic = self.topic or ctx.trigger_topic
        records = ctx.window(topic, self.cfg.window_size)
        if len(records) < self.cfg.window_size:
            return
        vertical = [decode_imu_sample(r.source_ts, r.payload).accel[2] for r in records]
        score = roughness_score(vertical, self.cfg)
        self.last_score = score
        cause = records[-1].seq
        if not self.recording and score > self.cfg.start_threshold:
            self.recording = True
            ctx.trigger(ActionKind.START_RECORDING, label=f"roughness:{score:.3f}", cause_seq=cause)
        elif self.recording and score < self.cfg.stop_threshold:
            self.recording = False
            ctx.trigger(ActionKind.STOP_RECORDING, label=f"roughness:{score:.3f}", cause_seq=cause)
