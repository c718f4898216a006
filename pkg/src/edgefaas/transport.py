"""In-process topic-based publish/subscribe data plane.

Topics are auto-created on first publish or subscribe. Each subscription owns
a bounded KeepLast(N) queue: when a publisher outruns the consumer, the oldest
queued envelope is dropped and the subscription's drop counter incremented.
Publishing never blocks on slow subscribers.

Durability is always volatile: a subscription only sees envelopes published
after it was created.

Thread model: ``publish`` is safe from any number of threads; each
``Subscription`` is consumed by one thread at a time.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from .clock import now_ns
from .errors import PayloadTooLarge, TransportClosed, TransportError

DEFAULT_MAX_PAYLOAD = 16 * 1024 * 1024


class ContentType(IntEnum):
    RAW_BYTES = 0
    IMU_SAMPLE = 1
    IMAGE_FRAME = 2
    TRIGGER_ACTION = 3
    RTT_RECORD = 4
    LOG_RECORD = 5


class Reliability(IntEnum):
    RELIABLE = 0
    BEST_EFFORT = 1


@dataclass(frozen=True)
class QosProfile:
    """KeepLast(history_depth) history with the given reliability.

    Durability is always volatile (no late-joiner replay), so it is not a
    field here.
    """

    history_depth: int = 10
    reliability: Reliability = Reliability.RELIABLE

    def __post_init__(self):
        if self.history_depth < 1:
            raise ValueError("history_depth must be >= 1")


@dataclass(frozen=True)
class Envelope:
    topic: str
    seq: int
    source_ts: int
    publish_ts: int
    content_type: ContentType
    payload: bytes


@dataclass
class TopicStats:
    published: int = 0
    delivered: int = 0


class Subscription:
    """Single-consumer handle over one topic's envelope stream."""

    def __init__(self, topic: str, qos: QosProfile, transport: "Transport"):
        self.topic = topic
        self.qos = qos
        self._transport = transport
        self._queue: deque[Envelope] = deque()
        self._cond = threading.Condition()
        self._drops = 0
        self._delivered = 0
        self._closed = False

    @property
    def drop_count(self) -> int:
        with self._cond:
            return self._drops

    @property
    def delivered_count(self) -> int:
        """Envelopes handed to the consumer so far."""
        with self._cond:
            return self._delivered

    def _offer(self, env: Envelope) -> bool:
        with self._cond:
            if self._closed:
                return False
            if len(self._queue) >= self.qos.history_depth:
                self._queue.popleft()
                self._drops += 1
            self._queue.append(env)
            self._cond.notify()
            return True

    def get(self, timeout: Optional[float] = None) -> Optional[Envelope]:
        """Next envelope in publish order, or None on timeout/close."""
        with self._cond:
            if not self._queue:
                self._cond.wait(timeout)
            if not self._queue:
                return None
            self._delivered += 1
            return self._queue.popleft()

    def drain(self) -> list[Envelope]:
        """All currently queued envelopes, oldest first."""
        with self._cond:
            out = list(self._queue)
            self._queue.clear()
            self._delivered += len(out)
            return out

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        self._transport._remove_subscription(self)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class _Topic:
    def __init__(self, name: str):
        self.name = name
        self.next_seq = 0
        self.subs: list[Subscription] = []
        self.stats = TopicStats()
        self.lock = threading.Lock()


class Transport:
    """In-process broker. See module docstring for semantics."""

    def __init__(self, max_payload: int = DEFAULT_MAX_PAYLOAD):
        self.max_payload = max_payload
        self._topics: dict[str, _Topic] = {}
        self._lock = threading.Lock()
        self._closed = False

    def _topic(self, name: str) -> _Topic:
        if not name:
            raise TransportError("topic name must be non-empty")
        with self._lock:
            if self._closed:
                raise TransportClosed("transport is shut down")
            topic = self._topics.get(name)
            if topic is None:
                topic = _Topic(name)
                self._topics[name] = topic
            return topic

    def publish(
        self,
        topic: str,
        payload: bytes,
        content_type: ContentType = ContentType.RAW_BYTES,
        source_ts: Optional[int] = None,
    ) -> int:
        """Fan out one envelope; returns the assigned per-topic sequence number."""
        if len(payload) > self.max_payload:
            raise PayloadTooLarge(
                f"payload of {len(payload)} bytes exceeds limit {self.max_payload}"
            )
        t = self._topic(topic)
        publish_ts = now_ns()
        if source_ts is None:
            source_ts = publish_ts
        # Fan-out happens under the topic lock so that concurrent publishers
        # cannot interleave deliveries out of sequence order. _offer never
        # blocks (KeepLast drops oldest), so the lock is held only briefly.
        with t.lock:
            seq = t.next_seq
            t.next_seq += 1
            env = Envelope(topic, seq, source_ts, publish_ts, content_type, bytes(payload))
            t.stats.published += 1
            for sub in t.subs:
                if sub._offer(env):
                    t.stats.delivered += 1
        return seq

    def subscribe(self, topic: str, qos: QosProfile = QosProfile()) -> Subscription:
        t = self._topic(topic)
        sub = Subscription(topic, qos, self)
        with t.lock:
            t.subs.append(sub)
        return sub

    def _remove_subscription(self, sub: Subscription) -> None:
        with self._lock:
            t = self._topics.get(sub.topic)
        if t is None:
            return
        with t.lock:
            if sub in t.subs:
                t.subs.remove(sub)

    def topic_stats(self, topic: str) -> TopicStats:
        t = self._topic(topic)
        with t.lock:
            return TopicStats(t.stats.published, t.stats.delivered)

    def close(self) -> None:
        with self._lock:
            self._closed = True
            topics = list(self._topics.values())
        for t in topics:
            with t.lock:
                subs = list(t.subs)
            for sub in subs:
                sub.close()
