"""Steady-state RTT capture: warm-up exclusion and phase binning.

A measurement session is a warm-up window during which arriving RTT records
are discarded, followed by a fixed number of execution phases. Records are
binned by their arrival time on the collector's clock; a record spanning a
phase boundary belongs to the phase of its arrival.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from ..clock import now_ns
from ..payloads import RTT_TOPIC, RttRecord
from ..transport import QosProfile


@dataclass(frozen=True)
class PhasePlan:
    warmup_s: float = 20.0
    phase_count: int = 3
    phase_length_s: float = 20.0

    def __post_init__(self):
        if self.warmup_s <= 0 or self.phase_count <= 0 or self.phase_length_s <= 0:
            raise ValueError("all phase plan fields must be positive")

    @property
    def total_s(self) -> float:
        return self.warmup_s + self.phase_count * self.phase_length_s


@dataclass(frozen=True)
class ArrivedRecord:
    record: RttRecord
    arrival_ns: int


def measure(
    transport,
    plan: PhasePlan,
    history_depth: int = 1024,
    stop: threading.Event | None = None,
) -> list[list[RttRecord]]:
    """Collect RTT records for one session; returns one list per phase."""
    sub = transport.subscribe(RTT_TOPIC, QosProfile(history_depth=history_depth))
    if stop is None:
        stop = threading.Event()
    phases: list[list[RttRecord]] = [[] for _ in range(plan.phase_count)]
    t0 = now_ns()
    warmup_end = t0 + int(plan.warmup_s * 1e9)
    session_end = t0 + int(plan.total_s * 1e9)
    phase_len_ns = int(plan.phase_length_s * 1e9)
    try:
        while not stop.is_set():
            now = now_ns()
            if now >= session_end:
                break
            env = sub.get(timeout=min(0.1, (session_end - now) / 1e9))
            if env is None:
                continue
            arrival = now_ns()
            if arrival < warmup_end or arrival >= session_end:
                continue
            index = (arrival - warmup_end) // phase_len_ns
            phases[min(index, plan.phase_count - 1)].append(RttRecord.from_json(env.payload))
    finally:
        sub.close()
    return phases


def pooled(phases: list[list[RttRecord]]) -> list[RttRecord]:
    return [r for phase in phases for r in phase]
