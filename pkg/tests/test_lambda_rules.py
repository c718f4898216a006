"""Decision-rule boundaries of the built-in lambdas, against a stub context."""

from __future__ import annotations

import numpy as np
import pytest

from edgefaas.errors import ShapeMismatch
from edgefaas.functions.brake_dark import BrakeDarkLambda
from edgefaas.functions.detector import DetectorLambda
from edgefaas.inference import MockDetectorBackend
from edgefaas.ingress import SignalRecord
from edgefaas.payloads import encode_detection_block, encode_imu_sample


class FrameStub:
    def __init__(self, payload: bytes, seq: int = 0):
        self._payload = payload
        self.seq = seq
        self.source_ts = 0

    def view(self):
        return memoryview(self._payload)


class CtxStub:
    """Minimal context: canned frame + IMU window, recorded triggers."""

    def __init__(self, frame: bytes, accel_x: list[float]):
        self.trigger_topic = "/camera"
        self._frame = FrameStub(frame)
        self._records = [
            SignalRecord(i, i, encode_imu_sample((x, 0.0, 0.0))) for i, x in enumerate(accel_x)
        ]
        self.triggers = []
        self._backend = MockDetectorBackend()

    def topics(self):
        return ["/camera", "/imu"]

    def latest(self, topic):
        return self._frame

    def window(self, topic, n):
        return self._records[-n:]

    def trigger(self, action, label="", cause_seq=None):
        self.triggers.append((action, cause_seq))

    def infer(self, model, inputs):
        return self._backend.run(model, inputs)

    def log(self, level, message):
        pass


def run_brake_dark(frame: bytes, accel_x: list[float], fn: BrakeDarkLambda | None = None):
    fn = fn or _brake_fn()
    ctx = CtxStub(frame, accel_x)
    fn.on_invoke(ctx)
    return fn, ctx.triggers


def _brake_fn() -> BrakeDarkLambda:
    fn = BrakeDarkLambda()
    fn.setup({"imu_topic": "/imu"})
    return fn


def test_brake_dark_starts_when_both_hold():
    _, triggers = run_brake_dark(bytes([30] * 100), [-5.0] * 10)
    assert [t[0] for t in triggers] == ["start_recording"]


def test_brake_dark_no_action_without_braking():
    _, triggers = run_brake_dark(bytes([30] * 100), [0.0] * 10)
    assert triggers == []


def test_brake_dark_boundary_rules():
    # braking uses <= on the accel threshold, dark uses < on luminance
    _, triggers = run_brake_dark(bytes([49] * 100), [-3.0] * 10)
    assert [t[0] for t in triggers] == ["start_recording"]
    _, triggers = run_brake_dark(bytes([50] * 100), [-3.0] * 10)  # luminance == threshold
    assert triggers == []
    _, triggers = run_brake_dark(bytes([49] * 100), [-2.999] * 10)  # just above accel threshold
    assert triggers == []


def test_brake_dark_stop_on_conjunction_break():
    fn, triggers = run_brake_dark(bytes([30] * 100), [-5.0] * 10)
    assert [t[0] for t in triggers] == ["start_recording"]
    _, triggers = run_brake_dark(bytes([200] * 100), [-5.0] * 10, fn=fn)  # bright again
    assert [t[0] for t in triggers] == ["stop_recording"]


def test_brake_dark_needs_full_imu_window():
    _, triggers = run_brake_dark(bytes([30] * 100), [-5.0] * 5)  # fewer than K samples
    assert triggers == []


def _detector_fn(**params) -> DetectorLambda:
    fn = DetectorLambda()
    fn.setup({k: str(v) for k, v in params.items()})
    return fn


def run_detector(boxes, **params):
    frame = bytearray(4096)
    block = encode_detection_block(boxes)
    frame[: len(block)] = block
    ctx = CtxStub(bytes(frame), [])
    _detector_fn(**params).on_invoke(ctx)
    return ctx.triggers


def test_detector_marks_confident_target():
    triggers = run_detector([(1, 1, 20, 20, 0, 0.9)])
    assert [t[0] for t in triggers] == ["mark"]


def test_detector_ignores_non_target_classes():
    triggers = run_detector([(1, 1, 20, 20, 7, 0.99)])
    assert triggers == []


def test_detector_confidence_threshold_is_strict():
    assert run_detector([(1, 1, 20, 20, 0, 0.5)]) == []  # == tau, strict >
    assert [t[0] for t in run_detector([(1, 1, 20, 20, 0, 0.500001)])] == ["mark"]


def test_detector_no_boxes_no_action():
    triggers = run_detector([])
    assert triggers == []


# -- mock backend shape handling -----------------------------------------------------


def test_mock_backend_rejects_wrong_rank():
    backend = MockDetectorBackend()
    with pytest.raises(ShapeMismatch):
        backend.run("mock-detector", {"frame": np.zeros((2, 2), dtype=np.uint8)})
    with pytest.raises(ShapeMismatch):
        backend.run("mock-detector", {"frame": np.zeros(8, dtype=np.float32)})
    with pytest.raises(ShapeMismatch):
        backend.run("mock-detector", {})


def test_mock_backend_decodes_k_rows():
    backend = MockDetectorBackend()
    payload = encode_detection_block([(1, 2, 3, 4, 0, 0.9), (5, 6, 7, 8, 1, 0.8), (9, 9, 11, 11, 2, 0.7)])
    out = backend.run("mock-detector", {"frame": np.frombuffer(payload, dtype=np.uint8)})
    assert out["detections"].shape == (3, 6)
    assert out["detections"][2][4] == 2
