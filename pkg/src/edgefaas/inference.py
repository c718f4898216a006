"""Pluggable inference backends behind a minimal named-tensor interface.

The default backend is "mock-detector": a deterministic decoder of the
detection block embedded in frame payloads (see payloads module). It takes a
1-D uint8 tensor named "frame" and returns a (k, 6) float32 tensor named
"detections" with rows (x1, y1, x2, y2, class_id, confidence). Output shape is
a pure function of the input bytes, so tests are reproducible without model
weights. A real ONNX runtime can plug in behind the same interface.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .errors import ModelNotFound, ShapeMismatch
from .payloads import decode_detection_block


class InferenceBackend(Protocol):
    def load(self, model) -> object: ...

    def run(self, handle, inputs: dict[str, np.ndarray]) -> dict[str, np.ndarray]: ...


class MockDetectorBackend:
    """Identity-decoder of embedded detection blocks."""

    def load(self, model) -> object:
        return "mock-detector"

    def run(self, handle, inputs: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        frame = inputs.get("frame")
        if frame is None:
            raise ShapeMismatch("mock-detector expects an input tensor named 'frame'")
        if frame.ndim != 1 or frame.dtype != np.uint8:
            raise ShapeMismatch(
                f"mock-detector expects a 1-D uint8 tensor, got {frame.dtype} rank {frame.ndim}"
            )
        boxes = decode_detection_block(frame.tobytes())
        out = np.array(boxes, dtype=np.float32).reshape(len(boxes), 6)
        return {"detections": out}


class BackendRegistry:
    """Model ref -> backend routing with lazy handle caching."""

    def __init__(self):
        self._backends: dict[str, InferenceBackend] = {"mock-detector": MockDetectorBackend()}
        self._handles: dict[str, object] = {}

    def register(self, model_ref: str, backend: InferenceBackend) -> None:
        self._backends[model_ref] = backend

    def run(self, model_ref: str, inputs: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        backend = self._backends.get(model_ref)
        if backend is None:
            raise ModelNotFound(f"no backend registered for model {model_ref!r}")
        handle = self._handles.get(model_ref)
        if handle is None:
            handle = backend.load(model_ref)
            self._handles[model_ref] = handle
        return backend.run(handle, inputs)
