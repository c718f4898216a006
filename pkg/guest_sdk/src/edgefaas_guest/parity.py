"""Cross-implementation check: native builtin vs guest package on one bag.

Both implementations run against their own transport and host, fed the same
bag in lockstep (each record fully consumed before the next), so the trigger
decision sequences are directly comparable. Scores are sampled after every
invocation from the conventional ``last_score`` attribute (native body /
guest module); functions without scores report a deviation of 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from edgefaas.bench.bag import ReplayBag
from edgefaas.host import FunctionHost
from edgefaas.manifest import EntrySpec, FunctionManifest
from edgefaas.payloads import ACTIONS_TOPIC, TriggerAction
from edgefaas.transport import QosProfile, Transport


@dataclass
class ParityReport:
    native_actions: list = field(default_factory=list)
    guest_actions: list = field(default_factory=list)
    max_score_deviation: float = 0.0
    scored_invocations: int = 0
    native_failures: int = 0
    guest_failures: int = 0

    @property
    def sequences_match(self) -> bool:
        return self.native_actions == self.guest_actions


class _Arm:
    def __init__(self, manifest: FunctionManifest):
        self.transport = Transport()
        self.actions = self.transport.subscribe(ACTIONS_TOPIC, QosProfile(history_depth=8192))
        self.host = FunctionHost(manifest, self.transport).load().start()

    def score(self) -> Optional[float]:
        body = self.host._body
        module = getattr(body, "module", None)  # guest bridge exposes its module
        holder = module if module is not None else body
        value = getattr(holder, "last_score", None)
        return None if value is None else float(value)

    def close(self) -> list[tuple[str, Optional[int]]]:
        self.host.stop()
        out = [
            (act.action.value, act.cause_seq)
            for act in (TriggerAction.from_json(e.payload) for e in self.actions.drain())
        ]
        self.transport.close()
        return out


def _wait_for(predicate, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.0005)
    return False


def guest_parity_suite(
    bag: Union[ReplayBag, str, Path],
    base_manifest: FunctionManifest,
    native_builtin: str,
    guest_package_ref: str,
) -> ParityReport:
    """Replay the bag to a native and a guest host; compare decisions/scores.

    ``base_manifest`` supplies mode, subscriptions and params; the entry is
    overridden per arm.
    """
    if not isinstance(bag, ReplayBag):
        bag = ReplayBag.load(bag)
    report = ParityReport()
    native = _Arm(_with_entry(base_manifest, EntrySpec("native", native_builtin)))
    guest = _Arm(_with_entry(base_manifest, EntrySpec("guest", guest_package_ref)))
    try:
        trigger_topic = base_manifest.trigger_topic
        subscribed = {s.topic for s in base_manifest.subscriptions}
        sent: dict[str, int] = {topic: 0 for topic in subscribed}
        topic_names = [t.name for t in bag.topics]
        for record in bag.records:
            name = topic_names[record.topic_index]
            if name not in subscribed:
                continue
            ctype = bag.topics[record.topic_index].content_type
            for arm in (native, guest):
                arm.transport.publish(name, record.payload, ctype, source_ts=record.timestamp_ns)
            sent[name] += 1
            if name == trigger_topic:
                expected = sent[name]
                for arm in (native, guest):
                    if not _wait_for(lambda a=arm: a.host.completed == expected):
                        raise RuntimeError(
                            f"{arm.host.manifest.name} fell behind at invocation {expected}"
                        )
                ns, gs = native.score(), guest.score()
                if ns is not None and gs is not None:
                    report.scored_invocations += 1
                    report.max_score_deviation = max(report.max_score_deviation, abs(ns - gs))
            else:
                expected = sent[name]
                for arm in (native, guest):
                    if not _wait_for(
                        lambda a=arm, n=name, c=expected: a.host.hub.channel_counters(n)["ingested"] == c
                    ):
                        raise RuntimeError(f"ingestion of {name} fell behind at {expected}")
        report.native_failures = native.host.failures
        report.guest_failures = guest.host.failures
    finally:
        report.native_actions = native.close()
        report.guest_actions = guest.close()
    return report


def _with_entry(manifest: FunctionManifest, entry: EntrySpec) -> FunctionManifest:
    doc = manifest.to_dict()
    doc["entry"] = {"kind": entry.kind, "ref": entry.ref}
    return FunctionManifest.from_dict(doc)
