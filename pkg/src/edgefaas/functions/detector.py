"""Object-triggered frame selection: inference, NMS, class/confidence filter.

A frame is marked for recording when, after greedy non-maximum suppression,
at least one detection of a target class has confidence strictly above the
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..payloads import ActionKind

DEFAULT_IOU_THRESHOLD = 0.45
DEFAULT_CONFIDENCE_THRESHOLD = 0.5
DEFAULT_TARGET_CLASSES = (0, 1)  # person, bicycle


@dataclass(frozen=True)
class Detection:
    box: tuple[float, float, float, float]  # x1, y1, x2, y2 with x1 < x2, y1 < y2
    class_id: int
    confidence: float

    def __post_init__(self):
        x1, y1, x2, y2 = self.box
        if not (x1 < x2 and y1 < y2):
            raise ValueError(f"box must be well-ordered, got {self.box}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


def iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    ix1 = max(a[0], b[0])
    iy1 = max(a[1], b[1])
    ix2 = min(a[2], b[2])
    iy2 = min(a[3], b[3])
    iw = max(0.0, ix2 - ix1)
    ih = max(0.0, iy2 - iy1)
    inter = iw * ih
    if inter == 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def nms(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy class-wise non-maximum suppression.

    Candidates are ordered by confidence descending, ties by lower class id,
    then lower x1 (a total order, so output is deterministic). The head is
    kept; remaining detections of the same class with IoU strictly above the
    threshold are discarded.
    """
    pending = sorted(detections, key=lambda d: (-d.confidence, d.class_id, d.box[0]))
    kept: list[Detection] = []
    while pending:
        head = pending.pop(0)
        kept.append(head)
        pending = [
            d
            for d in pending
            if d.class_id != head.class_id or iou(head.box, d.box) <= iou_threshold
        ]
    return kept


def decoded_to_detections(rows) -> list[Detection]:
    """Rows of (x1, y1, x2, y2, class_id, confidence) to Detection objects."""
    return [Detection((float(r[0]), float(r[1]), float(r[2]), float(r[3])), int(r[4]), float(r[5])) for r in rows]


class DetectorLambda:
    """Event-driven on the camera topic; marks frames containing targets."""

    def setup(self, params: dict) -> None:
        self.model = params.get("model", "mock-detector")
        self.iou_threshold = float(params.get("iou_threshold", DEFAULT_IOU_THRESHOLD))
        self.confidence_threshold = float(
            params.get("confidence_threshold", DEFAULT_CONFIDENCE_THRESHOLD)
        )
        classes = params.get("target_classes")
        self.target_classes = (
            {int(c) for c in classes.split(",")} if classes else set(DEFAULT_TARGET_CLASSES)
        )

    def on_invoke(self, ctx) -> None:
        import numpy as np

        frame = ctx.latest(ctx.trigger_topic)
        if frame is None:
            return
        outputs = ctx.infer(self.model, {"frame": np.frombuffer(frame.view(), dtype=np.uint8)})
        rows = outputs.get("detections")
        if rows is None or len(rows) == 0:
            return
        kept = nms(decoded_to_detections(rows), self.iou_threshold)
        hits = [
            d
            for d in kept
            if d.class_id in self.target_classes and d.confidence > self.confidence_threshold
        ]
        if hits:
            ctx.trigger(ActionKind.MARK, label=f"objects:{len(hits)}", cause_seq=frame.seq)
