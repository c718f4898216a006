"""The context object handed to guest code, mirroring the four-call API.

Frame data is exposed as a read-only view over the host's slot: no second
copy is made, and the view is forcibly invalidated when the invocation ends
(the underlying lease is released, so a retained view raises on access).
Low-volume records cross as value copies with all fields preserved
bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class GuestRecord:
    """Value copy of one low-volume record."""

    source_ts: int
    seq: int
    payload: bytes


class FrameView:
    """Zero-copy, read-only window onto a host frame slot."""

    def __init__(self, lease):
        self._lease = lease
        self._view = lease.view()
        self.source_ts = lease.source_ts
        self.seq = lease.seq
        self.length = lease.length

    @property
    def data(self) -> memoryview:
        return self._view

    def __len__(self) -> int:
        return self.length

    def _invalidate(self) -> None:
        self._view.release()


class GuestContext:
    """Guest-facing API: latest/window/trigger/infer/log."""

    def __init__(self, host_ctx):
        self._host_ctx = host_ctx
        self._views: list[FrameView] = []

    @property
    def trigger_topic(self) -> Optional[str]:
        return self._host_ctx.trigger_topic

    @property
    def params(self) -> dict:
        return dict(self._host_ctx.params)

    def topics(self) -> list:
        return self._host_ctx.topics()

    def latest(self, topic: str):
        item = self._host_ctx.latest(topic)
        if item is None:
            return None
        if hasattr(item, "view"):  # frame lease -> zero-copy view
            view = FrameView(item)
            self._views.append(view)
            return view
        return GuestRecord(item.source_ts, item.seq, item.payload)

    def window(self, topic: str, n: int) -> list[GuestRecord]:
        return [
            GuestRecord(r.source_ts, r.seq, r.payload) for r in self._host_ctx.window(topic, n)
        ]

    def trigger(self, action, label: str = "", cause_seq: Optional[int] = None) -> None:
        self._host_ctx.trigger(action, label=label, cause_seq=cause_seq)

    def infer(self, model_ref: str, inputs: dict) -> dict:
        return self._host_ctx.infer(model_ref, inputs)

    def log(self, level, message: str) -> None:
        self._host_ctx.log(level, message)

    def _close(self) -> None:
        """Invalidate every view and release its lease (idempotent host-side)."""
        for view in self._views:
            view._invalidate()
            view._lease.release()
        self._views.clear()
