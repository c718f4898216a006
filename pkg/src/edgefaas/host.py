"""The lambda runtime: one manifest, one ingress hub, one execution loop.

Scheduling modes:

* event: one invocation per trigger wakeup; arrivals during an in-flight
  invocation coalesce into the next wakeup (counted, never queued), so at
  most one invocation is ever in flight.
* periodic: invocations at t0 + k*period on the monotonic clock; missed
  ticks are skipped, never bunched.

The function body gets a context exposing the four-call API (data access,
triggering, inference, logging). Body exceptions increment the failure
counter and are logged; they never terminate the loop. The context is only
valid on the execution thread and only while its invocation is active.

Known relaxation: multi-topic reads are per-topic latest/window snapshots
with no cross-topic atomicity.
"""

from __future__ import annotations

import importlib
import queue
import threading
import traceback
from dataclasses import dataclass
from typing import Optional

from .clock import now_ns
from .control import ControlChannel, ControlEnvelope
from .errors import (
    CalledOutsideInvocation,
    GuestLoadFailure,
    HostError,
    InferenceError,
    UnknownBuiltin,
)
from .inference import BackendRegistry
from .ingress import IngressHub, SlotLease
from .manifest import FunctionManifest
from .payloads import (
    ACTIONS_TOPIC,
    RTT_TOPIC,
    ActionKind,
    LogLevel,
    LogRecord,
    RttRecord,
    TriggerAction,
)
from .transport import ContentType

GUEST_BRIDGE_MODULE = "edgefaas_guest.bridge"
STATUS_INTERVAL_S = 1.0
LOG_QUEUE_DEPTH = 1024


@dataclass
class HostStatus:
    function: str
    state: str
    invocations: int
    failures: int
    coalesced: int
    log_drops: int
    ingress: dict[str, dict[str, int]]
    last_error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "function": self.function,
            "state": self.state,
            "invocations": self.invocations,
            "failures": self.failures,
            "coalesced": self.coalesced,
            "log_drops": self.log_drops,
            "ingress": self.ingress,
            "last_error": self.last_error,
        }


class InvocationContext:
    """Per-invocation view of the runtime API handed to the function body."""

    def __init__(self, host: "FunctionHost", trigger_info: Optional[tuple[int, int]]):
        self._host = host
        self._thread_id = threading.get_ident()
        self._active = True
        self._leases: list[SlotLease] = []
        # (source_ts, seq) of the envelope that caused this invocation, if any
        self._trigger_info = trigger_info

    @property
    def trigger_topic(self) -> Optional[str]:
        return self._host.manifest.trigger_topic

    @property
    def params(self) -> dict:
        return self._host.manifest.params

    def topics(self) -> list[str]:
        return self._host.hub.topics()

    def _check(self) -> None:
        if not self._active:
            raise CalledOutsideInvocation("context used after its invocation ended")
        if threading.get_ident() != self._thread_id:
            raise CalledOutsideInvocation("context used from a non-execution thread")

    def latest(self, topic: str):
        self._check()
        item = self._host.hub.latest(topic)
        if isinstance(item, SlotLease):
            self._leases.append(item)
        return item

    def window(self, topic: str, n: int):
        self._check()
        return self._host.hub.window(topic, n)

    def trigger(self, action: ActionKind, label: str = "", cause_seq: Optional[int] = None) -> None:
        self._check()
        if cause_seq is None and self._trigger_info is not None:
            cause_seq = self._trigger_info[1]
        decision_ts = now_ns()
        act = TriggerAction(ActionKind(action), label, decision_ts, self._host.manifest.name, cause_seq)
        self._host._publish_action(act)
        if self._host.instrument_rtt and self._trigger_info is not None:
            record = RttRecord(self._host.manifest.name, cause_seq, self._trigger_info[0], decision_ts)
            self._host._publish_rtt(record)

    def infer(self, model_ref: str, inputs: dict) -> dict:
        self._check()
        try:
            return self._host.backends.run(model_ref, inputs)
        except InferenceError:
            raise
        except Exception as exc:
            raise InferenceError(f"backend failure for {model_ref!r}: {exc}") from exc

    def log(self, level: LogLevel, message: str) -> None:
        self._check()
        self._host._log(LogLevel(level), message)

    def release(self, lease: SlotLease) -> None:
        """Release a frame lease before the invocation ends (optional)."""
        lease.release()
        if lease in self._leases:
            self._leases.remove(lease)

    def _close(self) -> None:
        self._active = False
        for lease in self._leases:
            if not lease._released:
                lease.release()
        self._leases.clear()


class FunctionHost:
    def __init__(
        self,
        manifest: FunctionManifest,
        transport,
        orchestrator_channel: Optional[ControlChannel] = None,
        instrument_rtt: bool = False,
    ):
        self.manifest = manifest.validate()
        self.transport = transport
        self.instrument_rtt = instrument_rtt
        self.backends = BackendRegistry()
        self.hub = IngressHub(trigger_topic=manifest.trigger_topic)
        self.state = "starting"
        self.invocations = 0
        self.completed = 0  # invocations whose body has returned
        self.failures = 0
        self.coalesced = 0
        self.log_drops = 0
        self.last_error: Optional[str] = None
        self._body = None
        self._stop = threading.Event()
        self._run_thread: Optional[threading.Thread] = None
        self._log_queue: queue.Queue = queue.Queue(maxsize=LOG_QUEUE_DEPTH)
        self._channel = orchestrator_channel
        self._writer: Optional[threading.Thread] = None
        self._standalone_log = orchestrator_channel is None

    # -- lifecycle ---------------------------------------------------------

    def load(self) -> "FunctionHost":
        try:
            self._body = self._resolve_entry()
            for spec in self.manifest.subscriptions:
                sub = self.transport.subscribe(spec.topic, spec.qos)
                self.hub.attach(sub, spec.clazz, spec.depth_or_slots, spec.slot_size)
            self._body.setup(dict(self.manifest.params))
        except Exception as exc:
            self.state = "failed"
            self.last_error = f"{type(exc).__name__}: {exc}"
            self._send_status()
            raise
        self._writer = threading.Thread(target=self._writer_loop, name="host-writer", daemon=True)
        self._writer.start()
        self.state = "running"
        self._send_status()
        return self

    def _resolve_entry(self):
        entry = self.manifest.entry
        if entry.kind == "native":
            from .functions import BUILTINS

            cls = BUILTINS.get(entry.ref)
            if cls is None:
                raise UnknownBuiltin(f"no builtin function {entry.ref!r}")
            return cls()
        try:
            bridge_mod = importlib.import_module(GUEST_BRIDGE_MODULE)
        except ImportError as exc:
            raise GuestLoadFailure(
                f"guest runtime {GUEST_BRIDGE_MODULE!r} is not installed: {exc}"
            ) from exc
        try:
            return bridge_mod.load_guest(entry.ref)
        except Exception as exc:
            raise GuestLoadFailure(f"guest package {entry.ref!r} failed to load: {exc}") from exc

    def run(self) -> None:
        """Execution loop; returns after stop() or a fatal transport error."""
        if self.state != "running":
            raise HostError(f"host is {self.state}, not running")
        try:
            if self.manifest.mode == "event":
                self._run_event()
            else:
                self._run_periodic()
        finally:
            if self.state == "running":
                self.state = "stopped"
            self._send_status()
            self.hub.close()

    def start(self) -> "FunctionHost":
        """run() on a dedicated execution thread (in-process deployments)."""
        self._run_thread = threading.Thread(target=self.run, name=f"host-{self.manifest.name}", daemon=True)
        self._run_thread.start()
        return self

    def stop(self, timeout: float = 5.0) -> None:
        self._stop.set()
        if self._run_thread is not None:
            self._run_thread.join(timeout=timeout)

    def _run_event(self) -> None:
        while not self._stop.is_set():
            wake = self.hub.await_trigger(timeout=0.1)
            if wake is None:
                continue
            self.coalesced += wake - 1
            self._invoke(self.hub.last_trigger())

    def _run_periodic(self) -> None:
        period_ns = self.manifest.period_ms * 1_000_000
        t0 = now_ns()
        k = 1
        while not self._stop.is_set():
            target = t0 + k * period_ns
            now = now_ns()
            if now < target:
                self._stop.wait(min((target - now) / 1e9, 0.05))
                continue
            self._invoke(None)
            # skip ticks missed while the body ran; never bunch executions
            k = max(k + 1, (now_ns() - t0) // period_ns + 1)

    def _invoke(self, trigger_info: Optional[tuple[int, int]]) -> None:
        self.invocations += 1
        ctx = InvocationContext(self, trigger_info)
        try:
            self._body.on_invoke(ctx)
        except Exception as exc:
            self.failures += 1
            self.last_error = f"{type(exc).__name__}: {exc}"
            self._log(
                LogLevel.ERROR,
                f"invocation failed: {self.last_error}\n{traceback.format_exc()}",
            )
        finally:
            ctx._close()
            self.completed += 1

    # -- emission paths ----------------------------------------------------

    def _publish_action(self, action: TriggerAction) -> None:
        self.transport.publish(
            ACTIONS_TOPIC, action.to_json(), ContentType.TRIGGER_ACTION, source_ts=action.decision_ts
        )

    def _publish_rtt(self, record: RttRecord) -> None:
        self.transport.publish(RTT_TOPIC, record.to_json(), ContentType.RTT_RECORD, source_ts=record.t_out)

    def _log(self, level: LogLevel, message: str) -> None:
        record = LogRecord.make(level, now_ns(), self.manifest.name, message)
        try:
            self._log_queue.put_nowait(record)
        except queue.Full:
            self.log_drops += 1

    def _writer_loop(self) -> None:
        last_status = 0.0
        while True:
            try:
                record = self._log_queue.get(timeout=STATUS_INTERVAL_S)
            except queue.Empty:
                record = None
            if record is not None:
                self._emit_log(record)
            now = now_ns() / 1e9
            if now - last_status >= STATUS_INTERVAL_S:
                self._send_status()
                last_status = now
            if self._stop.is_set() and self._log_queue.empty():
                return

    def _emit_log(self, record: LogRecord) -> None:
        if self._channel is not None:
            try:
                self._channel.send(ControlEnvelope("log", payload={"records": [record.to_dict()]}))
            except OSError:
                self.log_drops += 1
        elif self._standalone_log:
            print(f"[{record.level.value}] {record.function}: {record.message}", flush=True)

    def status(self) -> HostStatus:
        ingress = {t: self.hub.channel_counters(t) for t in self.hub.topics()}
        return HostStatus(
            self.manifest.name,
            self.state,
            self.invocations,
            self.failures,
            self.coalesced,
            self.log_drops,
            ingress,
            self.last_error,
        )

    def _send_status(self) -> None:
        if self._channel is None:
            return
        try:
            self._channel.send(ControlEnvelope("status", payload=self.status().to_dict()))
        except OSError:
            pass
