"""Bag replay onto the transport with gap preservation and re-alignment.

Inter-record gaps from the bag are preserved, scaled by 1/speed. With
realign on (the default for benchmarking), every outgoing envelope's
source_ts is replaced with the monotonic now at send, standing in for the
timestamp-alignment middleware in front of the system under test. Loop mode
restarts from the first record with a wrap gap equal to the median record
gap.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from statistics import median
from typing import Optional, Union

from ..clock import now_ns
from .bag import ReplayBag


@dataclass(frozen=True)
class ReplayReport:
    records_sent: int
    duration_s: float


def replay(
    bag: Union[ReplayBag, str, Path],
    transport,
    speed: float = 1.0,
    realign: bool = True,
    loop: bool = False,
    stop: Optional[threading.Event] = None,
) -> ReplayReport:
    """Publish all bag records in order; blocks until done or stop is set."""
    if speed <= 0:
        raise ValueError("speed must be positive")
    if not isinstance(bag, ReplayBag):
        bag = ReplayBag.load(bag)
    if not bag.records:
        return ReplayReport(0, 0.0)
    if stop is None:
        stop = threading.Event()

    gaps = [
        bag.records[i + 1].timestamp_ns - bag.records[i].timestamp_ns
        for i in range(len(bag.records) - 1)
    ]
    wrap_gap = int(median(gaps)) if gaps else 0

    sent = 0
    started = now_ns()
    send_at = started
    while not stop.is_set():
        for i, record in enumerate(bag.records):
            if stop.is_set():
                break
            while True:
                now = now_ns()
                if now >= send_at:
                    break
                if stop.wait(min((send_at - now) / 1e9, 0.05)):
                    break
            topic = bag.topics[record.topic_index]
            source_ts = now_ns() if realign else record.timestamp_ns
            transport.publish(topic.name, record.payload, topic.content_type, source_ts)
            sent += 1
            if i + 1 < len(bag.records):
                gap = bag.records[i + 1].timestamp_ns - record.timestamp_ns
            else:
                gap = wrap_gap
            send_at += int(gap / speed)
        if not loop:
            break
    return ReplayReport(sent, (now_ns() - started) / 1e9)
