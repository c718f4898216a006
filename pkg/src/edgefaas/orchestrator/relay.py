"""Upstream registry link: desired-state intake and log/status relay.

Outbound records are batched (flush at ``batch_max`` records or after
``flush_interval_s``) and buffered across disconnects in a bounded backlog
(oldest dropped, counted). The link reconnects with exponential backoff.
Inbound desired_state envelopes invoke the callback; request/response
exchanges (fetch_package) are correlated by envelope id.
"""

from __future__ import annotations

import base64
import queue
import socket
import threading
import time
from collections import deque
from typing import Callable, Optional

from ..control import ControlChannel, ControlEnvelope
from ..errors import RegistryError

AUTH_REJECTED_EXIT_CODE = 13


def _connect(endpoint: str, timeout: float = 3.0) -> socket.socket:
    if endpoint.startswith("tcp:"):
        host, _, port = endpoint[4:].rpartition(":")
        return socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
    sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    sock.settimeout(timeout)
    sock.connect(endpoint)
    return sock


class RegistryLink:
    def __init__(
        self,
        endpoint: str,
        vehicle_id: str,
        token: str,
        on_desired_state: Callable[[dict], None],
        backlog: int = 10_000,
        batch_max: int = 100,
        flush_interval_s: float = 0.5,
        reconnect_initial_s: float = 0.2,
        reconnect_cap_s: float = 5.0,
    ):
        self.endpoint = endpoint
        self.vehicle_id = vehicle_id
        self.token = token
        self.on_desired_state = on_desired_state
        self.batch_max = batch_max
        self.flush_interval_s = flush_interval_s
        self.reconnect_initial_s = reconnect_initial_s
        self.reconnect_cap_s = reconnect_cap_s
        self.auth_rejected = threading.Event()
        self.drop_count = 0
        self._backlog: deque[dict] = deque(maxlen=backlog)
        self._backlog_lock = threading.Lock()
        self._chan: Optional[ControlChannel] = None
        self._chan_lock = threading.Lock()
        self._connected = threading.Event()
        self._pending: dict[int, queue.Queue] = {}
        self._next_id = 1
        self._id_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="registry-link", daemon=True)
        # desired states are applied off the reader thread: applying may call
        # fetch_package, whose ack the reader itself must deliver
        self._apply_queue: queue.Queue = queue.Queue()
        self._apply_thread = threading.Thread(target=self._apply_loop, name="state-apply", daemon=True)

    def start(self) -> "RegistryLink":
        self._thread.start()
        self._apply_thread.start()
        return self

    def close(self) -> None:
        self._stop.set()
        self._apply_queue.put(None)
        with self._chan_lock:
            if self._chan is not None:
                self._chan.close()
        self._thread.join(timeout=5)
        self._apply_thread.join(timeout=5)

    def _apply_loop(self) -> None:
        while True:
            payload = self._apply_queue.get()
            if payload is None or self._stop.is_set():
                return
            try:
                self.on_desired_state(payload)
            except Exception:
                pass  # the callback owns its error reporting

    # -- outbound ------------------------------------------------------------

    def enqueue_log(self, record: dict) -> None:
        with self._backlog_lock:
            if len(self._backlog) == self._backlog.maxlen:
                self.drop_count += 1
            self._backlog.append(record)

    def backlog_size(self) -> int:
        with self._backlog_lock:
            return len(self._backlog)

    def send_status(self, payload: dict) -> None:
        self._try_send(ControlEnvelope("status", payload=payload))

    def ack_revision(self, revision: int) -> None:
        self._try_send(ControlEnvelope("ack", payload={"applied_revision": revision}))

    def fetch_package(self, checksum: str, timeout: float = 30.0) -> bytes:
        if not self._connected.wait(timeout):
            raise RegistryError("registry link is not connected")
        with self._id_lock:
            req_id = self._next_id
            self._next_id += 1
        waiter: queue.Queue = queue.Queue(maxsize=1)
        self._pending[req_id] = waiter
        try:
            self._try_send(ControlEnvelope("fetch_package", req_id, {"checksum": checksum}))
            try:
                payload = waiter.get(timeout=timeout)
            except queue.Empty:
                raise RegistryError(f"fetch of {checksum} timed out")
        finally:
            self._pending.pop(req_id, None)
        if "error" in payload:
            raise RegistryError(payload["error"])
        return base64.b64decode(payload["blob_b64"])

    def _try_send(self, env: ControlEnvelope) -> bool:
        with self._chan_lock:
            chan = self._chan
        if chan is None:
            return False
        try:
            chan.send(env)
            return True
        except (ConnectionError, OSError):
            return False

    # -- connection loop ---------------------------------------------------------

    @property
    def connected(self) -> bool:
        return self._connected.is_set()

    def _run(self) -> None:
        delay = self.reconnect_initial_s
        while not self._stop.is_set():
            try:
                chan = ControlChannel(_connect(self.endpoint))
            except OSError:
                if self._stop.wait(delay):
                    return
                delay = min(delay * 2, self.reconnect_cap_s)
                continue
            try:
                chan.send(
                    ControlEnvelope("hello", 0, {"vehicle_id": self.vehicle_id, "token": self.token})
                )
                reply = chan.recv(timeout=5)
                if reply is None or reply.payload.get("error") == "auth-failed":
                    self.auth_rejected.set()
                    chan.close()
                    return
            except (ConnectionError, OSError, socket.timeout):
                chan.close()
                continue
            with self._chan_lock:
                self._chan = chan
            self._connected.set()
            delay = self.reconnect_initial_s
            try:
                self._session(chan)
            except (ConnectionError, OSError):
                pass
            finally:
                self._connected.clear()
                with self._chan_lock:
                    self._chan = None
                chan.close()

    def _session(self, chan: ControlChannel) -> None:
        last_flush = time.monotonic()
        while not self._stop.is_set():
            try:
                env = chan.recv(timeout=0.05)
            except socket.timeout:
                env = False  # no envelope this tick
            if env is None:
                return  # EOF
            if env:
                self._dispatch(env)
            now = time.monotonic()
            if self.backlog_size() >= self.batch_max or (
                self.backlog_size() > 0 and now - last_flush >= self.flush_interval_s
            ):
                self._flush_logs(chan)
                last_flush = now

    def _flush_logs(self, chan: ControlChannel) -> None:
        while True:
            with self._backlog_lock:
                batch = [self._backlog.popleft() for _ in range(min(self.batch_max, len(self._backlog)))]
            if not batch:
                return
            try:
                chan.send(ControlEnvelope("log", payload={"records": batch}))
            except (ConnectionError, OSError):
                with self._backlog_lock:  # put back, preserve order
                    for record in reversed(batch):
                        self._backlog.appendleft(record)
                raise

    def _dispatch(self, env: ControlEnvelope) -> None:
        if env.type == "desired_state":
            self._apply_queue.put(env.payload)
        elif env.type == "ack":
            waiter = self._pending.get(env.id)
            if waiter is not None:
                try:
                    waiter.put_nowait(env.payload)
                except queue.Full:
                    pass
