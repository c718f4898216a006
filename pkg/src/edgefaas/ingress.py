"""Per-function data staging between transport receivers and the execution thread.

Two channel classes:

* ``low_volume`` (signals such as IMU samples): records are copied into a
  fixed-capacity ring buffer. Writers never wait for readers and readers never
  wait for writers; a read that races an overwrite is retried once and then
  the torn record is excluded (snapshot semantics, not linearizability).

* ``high_volume`` (camera frames): the payload is copied exactly once into a
  pre-allocated slot and shared from then on through lease counting. A slot is
  reused only when its lease count returns to zero, so bytes read through a
  lease are immutable. When every slot is busy the incoming frame is dropped
  and counted (drop-newest), keeping the frames the consumer is using intact.

Each hub follows the many-producer, single-consumer pattern: one receiver
thread per attached topic feeds the buffers, one consumer thread calls
``latest``/``window``/``await_trigger``. At most one topic per hub may be the
trigger topic; arrivals on it while the consumer is busy coalesce into a
single wakeup that reports how many arrivals it stands for.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from .errors import (
    DuplicateTopic,
    NoTriggerTopic,
    UnknownTopic,
    WrongChannelClass,
)

DEFAULT_RING_DEPTH = 256
DEFAULT_SLOT_COUNT = 8
DEFAULT_SLOT_SIZE = 8 * 1024 * 1024


class ChannelClass(str, Enum):
    LOW_VOLUME = "low_volume"
    HIGH_VOLUME = "high_volume"


@dataclass(frozen=True)
class SignalRecord:
    source_ts: int
    seq: int
    payload: bytes


class RingBuffer:
    """Overwrite-oldest ring of SignalRecords with non-blocking snapshot reads.

    Cells carry the global write position so readers can detect a concurrent
    overwrite: a cell whose stored position differs from the expected one was
    recycled mid-read.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._cells: list[Optional[tuple[int, SignalRecord]]] = [None] * capacity
        self._count = 0

    def push(self, record: SignalRecord) -> None:
        pos = self._count
        self._cells[pos % self.capacity] = (pos, record)
        self._count = pos + 1

    def _read_pos(self, pos: int) -> Optional[SignalRecord]:
        for _ in range(2):  # one retry, then exclude
            cell = self._cells[pos % self.capacity]
            if cell is not None and cell[0] == pos:
                return cell[1]
        return None

    def latest(self) -> Optional[SignalRecord]:
        count = self._count
        if count == 0:
            return None
        return self._read_pos(count - 1)

    def window(self, n: int) -> list[SignalRecord]:
        """Up to n newest records, oldest first (ascending seq)."""
        count = self._count
        avail = min(n, count, self.capacity)
        out = []
        for pos in range(count - avail, count):
            rec = self._read_pos(pos)
            if rec is not None:
                out.append(rec)
        return out

    def __len__(self) -> int:
        return min(self._count, self.capacity)


class SlotPool:
    """Fixed set of pre-allocated frame slots managed by lease counts.

    Counter identity (kept atomic under the pool lock):
        frames_ingested == leases_granted + drop_count
    where leases_granted counts only new-frame leases, not clones.
    Oversize frames are rejected before ingestion and counted separately.
    """

    def __init__(self, slot_count: int, slot_size: int):
        if slot_count < 1 or slot_size < 1:
            raise ValueError("slot_count and slot_size must be >= 1")
        self.slot_size = slot_size
        self.slot_count = slot_count
        self._slots = [bytearray(slot_size) for _ in range(slot_count)]
        self._lease_counts = [0] * slot_count
        self._free = list(range(slot_count))
        self._lock = threading.Lock()
        self.frames_ingested = 0
        self.leases_granted = 0
        self.leases_cloned = 0
        self.drop_count = 0
        self.oversize_count = 0

    def ingest(self, payload: bytes, source_ts: int, seq: int) -> Optional["SlotLease"]:
        """Copy payload once into a free slot; None when dropped."""
        if len(payload) > self.slot_size:
            with self._lock:
                self.oversize_count += 1
            return None
        with self._lock:
            self.frames_ingested += 1
            if not self._free:
                self.drop_count += 1
                return None
            idx = self._free.pop()
            self._lease_counts[idx] = 1
            self.leases_granted += 1
        # Slot is exclusively ours until the lease is visible to anyone else.
        self._slots[idx][: len(payload)] = payload
        return SlotLease(self, idx, len(payload), source_ts, seq)

    def _clone(self, idx: int) -> None:
        with self._lock:
            if self._lease_counts[idx] <= 0:
                raise RuntimeError("clone of a released slot lease")
            self._lease_counts[idx] += 1
            self.leases_cloned += 1

    def _release(self, idx: int) -> None:
        with self._lock:
            if self._lease_counts[idx] <= 0:
                raise RuntimeError("double release of a slot lease")
            self._lease_counts[idx] -= 1
            if self._lease_counts[idx] == 0:
                self._free.append(idx)

    def lease_count(self, idx: int) -> int:
        with self._lock:
            return self._lease_counts[idx]

    def counters(self) -> dict[str, int]:
        with self._lock:
            return {
                "frames_ingested": self.frames_ingested,
                "leases_granted": self.leases_granted,
                "leases_cloned": self.leases_cloned,
                "drop_count": self.drop_count,
                "oversize_count": self.oversize_count,
                "outstanding": sum(1 for c in self._lease_counts if c > 0),
            }


class SlotLease:
    """Handle to one ingested frame. Release exactly once; clone for sharing."""

    def __init__(self, pool: SlotPool, slot_index: int, length: int, source_ts: int, seq: int):
        self._pool = pool
        self.slot_index = slot_index
        self.length = length
        self.source_ts = source_ts
        self.seq = seq
        self._released = False

    def view(self) -> memoryview:
        """Read-only view of the frame bytes; valid while the lease is held."""
        if self._released:
            raise RuntimeError("lease already released")
        return memoryview(self._pool._slots[self.slot_index])[: self.length].toreadonly()

    def tobytes(self) -> bytes:
        return bytes(self.view())

    def clone(self) -> "SlotLease":
        if self._released:
            raise RuntimeError("lease already released")
        self._pool._clone(self.slot_index)
        return SlotLease(self._pool, self.slot_index, self.length, self.source_ts, self.seq)

    def release(self) -> None:
        if not self._released:
            self._released = True
            self._pool._release(self.slot_index)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.release()


class _Channel:
    def __init__(self, topic: str, clazz: ChannelClass, ring: Optional[RingBuffer], pool: Optional[SlotPool]):
        self.topic = topic
        self.clazz = clazz
        self.ring = ring
        self.pool = pool
        self.current: Optional[SlotLease] = None
        self.current_lock = threading.Lock()
        self.ingested = 0  # records routed into this channel
        self.thread: Optional[threading.Thread] = None
        self.subscription = None


class IngressHub:
    """Staging hub for one function. Single consumer thread assumed."""

    def __init__(self, trigger_topic: Optional[str] = None):
        self.trigger_topic = trigger_topic
        self._channels: dict[str, _Channel] = {}
        self._stop = threading.Event()
        self._trig_cond = threading.Condition()
        self._trig_pending = 0
        self._trigger_arrivals = 0
        self._last_trigger: Optional[tuple[int, int]] = None  # (source_ts, seq)

    def attach(
        self,
        subscription,
        clazz: Union[ChannelClass, str],
        depth_or_slots: int,
        slot_size: int = DEFAULT_SLOT_SIZE,
    ) -> str:
        """Start draining a subscription into a new channel; returns the topic."""
        clazz = ChannelClass(clazz)
        topic = subscription.topic
        if topic in self._channels:
            raise DuplicateTopic(f"topic {topic!r} already attached")
        if clazz == ChannelClass.LOW_VOLUME:
            ch = _Channel(topic, clazz, RingBuffer(depth_or_slots), None)
        else:
            ch = _Channel(topic, clazz, None, SlotPool(depth_or_slots, slot_size))
        ch.subscription = subscription
        self._channels[topic] = ch
        ch.thread = threading.Thread(
            target=self._receive_loop, args=(ch,), name=f"ingress-{topic}", daemon=True
        )
        ch.thread.start()
        return topic

    def _receive_loop(self, ch: _Channel) -> None:
        is_trigger = ch.topic == self.trigger_topic
        while not self._stop.is_set():
            env = ch.subscription.get(timeout=0.05)
            if env is None:
                continue
            if ch.clazz == ChannelClass.LOW_VOLUME:
                ch.ring.push(SignalRecord(env.source_ts, env.seq, env.payload))
                ch.ingested += 1
            else:
                lease = ch.pool.ingest(env.payload, env.source_ts, env.seq)
                ch.ingested += 1
                if lease is not None:
                    with ch.current_lock:
                        old, ch.current = ch.current, lease
                    if old is not None:
                        old.release()
            if is_trigger:
                with self._trig_cond:
                    self._trig_pending += 1
                    self._trigger_arrivals += 1
                    self._last_trigger = (env.source_ts, env.seq)
                    self._trig_cond.notify()

    def _channel(self, topic: str) -> _Channel:
        ch = self._channels.get(topic)
        if ch is None:
            raise UnknownTopic(f"topic {topic!r} not attached")
        return ch

    def latest(self, topic: str) -> Optional[Union[SignalRecord, SlotLease]]:
        """Newest item without consuming it; frame channels grant a new lease."""
        ch = self._channel(topic)
        if ch.clazz == ChannelClass.LOW_VOLUME:
            return ch.ring.latest()
        with ch.current_lock:
            return ch.current.clone() if ch.current is not None else None

    def window(self, topic: str, n: int) -> list[SignalRecord]:
        ch = self._channel(topic)
        if ch.clazz != ChannelClass.LOW_VOLUME:
            raise WrongChannelClass(f"topic {topic!r} is high_volume; only latest() applies")
        return ch.ring.window(n)

    def await_trigger(self, timeout: float) -> Optional[int]:
        """Block until >=1 trigger arrival since the last call, or timeout.

        Returns the number of coalesced arrivals, or None on timeout.
        """
        if self.trigger_topic is None:
            raise NoTriggerTopic("hub has no trigger topic configured")
        with self._trig_cond:
            if self._trig_pending == 0:
                self._trig_cond.wait(timeout)
            if self._trig_pending == 0:
                return None
            count, self._trig_pending = self._trig_pending, 0
            return count

    def last_trigger(self) -> Optional[tuple[int, int]]:
        """(source_ts, seq) of the newest trigger-topic arrival."""
        with self._trig_cond:
            return self._last_trigger

    @property
    def trigger_arrivals(self) -> int:
        with self._trig_cond:
            return self._trigger_arrivals

    def channel_counters(self, topic: str) -> dict[str, int]:
        ch = self._channel(topic)
        out = {"ingested": ch.ingested, "sub_drops": getattr(ch.subscription, "drop_count", 0)}
        if ch.pool is not None:
            out.update(ch.pool.counters())
        return out

    def topics(self) -> list[str]:
        return list(self._channels)

    def channel_class(self, topic: str) -> ChannelClass:
        return self._channel(topic).clazz

    def pool(self, topic: str) -> Optional[SlotPool]:
        return self._channel(topic).pool

    def close(self) -> None:
        self._stop.set()
        for ch in self._channels.values():
            if ch.thread is not None:
                ch.thread.join(timeout=2)
            if ch.subscription is not None:
                ch.subscription.close()
            with ch.current_lock:
                if ch.current is not None:
                    ch.current.release()
                    ch.current = None
        with self._trig_cond:
            self._trig_cond.notify_all()
