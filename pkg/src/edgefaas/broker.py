"""Socket broker exposing an in-process Transport to other processes.

One connection carries either a publish stream or exactly one subscription
(selected by a ``/_ctl/subscribe`` envelope as the first frame). Remote
publishes are synchronous: the broker answers each with a ``/_ctl/ack`` frame
carrying the assigned sequence number.

Reliability on the socket path: ``reliable`` subscriptions lose envelopes only
through KeepLast history overflow in the broker-side queue (sends block);
``best_effort`` additionally drops frames when the socket exerts backpressure
for longer than a short timeout.

Endpoints are strings: ``tcp:HOST:PORT`` or a filesystem path (Unix socket).
``RemoteTransport`` mirrors the ``Transport`` publish/subscribe interface, so
function hosts work identically against either.
"""

from __future__ import annotations

import json
import os
import socket
import threading
from typing import Optional

from . import wire
from .clock import now_ns
from .errors import PayloadTooLarge, TransportClosed, TransportError
from .transport import (
    DEFAULT_MAX_PAYLOAD,
    ContentType,
    Envelope,
    QosProfile,
    Reliability,
    Transport,
)

_BEST_EFFORT_SEND_TIMEOUT = 0.05


def _parse_endpoint(endpoint: str):
    if endpoint.startswith("tcp:"):
        host, _, port = endpoint[4:].rpartition(":")
        return (socket.AF_INET, (host or "127.0.0.1", int(port)))
    return (socket.AF_UNIX, endpoint)


def _listen(endpoint: str) -> socket.socket:
    family, addr = _parse_endpoint(endpoint)
    srv = socket.socket(family, socket.SOCK_STREAM)
    if family == socket.AF_INET:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    else:
        try:
            os.unlink(addr)
        except FileNotFoundError:
            pass
    srv.bind(addr)
    srv.listen(64)
    return srv


def _connect(endpoint: str) -> socket.socket:
    family, addr = _parse_endpoint(endpoint)
    sock = socket.socket(family, socket.SOCK_STREAM)
    sock.connect(addr)
    if family == socket.AF_INET:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return sock


class BrokerServer:
    """Serves a local Transport over a stream socket."""

    def __init__(self, transport: Transport, endpoint: str):
        self.transport = transport
        self.endpoint = endpoint
        self._srv = _listen(endpoint)
        if endpoint.startswith("tcp:") and endpoint.endswith(":0"):
            port = self._srv.getsockname()[1]
            host = endpoint[4:].rpartition(":")[0] or "127.0.0.1"
            self.endpoint = f"tcp:{host}:{port}"
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self):
        self._srv.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self._srv.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            t = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_conn(self, conn: socket.socket):
        try:
            first = wire.recv_frame(conn)
            if first is None:
                return
            if first.topic == wire.CTL_SUBSCRIBE:
                self._serve_subscriber(conn, first)
            else:
                self._serve_publisher(conn, first)
        except (TransportError, OSError):
            pass
        finally:
            conn.close()

    def _serve_publisher(self, conn: socket.socket, first: Envelope):
        env: Optional[Envelope] = first
        while env is not None and not self._stop.is_set():
            seq = self.transport.publish(env.topic, env.payload, env.content_type, env.source_ts)
            ack = Envelope(wire.CTL_ACK, seq, now_ns(), now_ns(), ContentType.RAW_BYTES, b"")
            wire.send_frame(conn, ack)
            env = wire.recv_frame(conn)

    def _serve_subscriber(self, conn: socket.socket, request: Envelope):
        opts = json.loads(request.payload.decode("utf-8"))
        qos = QosProfile(
            history_depth=int(opts.get("history_depth", 10)),
            reliability=Reliability[opts.get("reliability", "RELIABLE").upper()],
        )
        best_effort = qos.reliability == Reliability.BEST_EFFORT
        sub = self.transport.subscribe(opts["topic"], qos)
        # confirm creation so the client knows the volatile window has opened
        ack = Envelope(wire.CTL_ACK, 0, now_ns(), now_ns(), ContentType.RAW_BYTES, b"")
        wire.send_frame(conn, ack)
        if best_effort:
            conn.settimeout(_BEST_EFFORT_SEND_TIMEOUT)
        try:
            while not self._stop.is_set():
                env = sub.get(timeout=0.2)
                if env is None:
                    continue
                try:
                    wire.send_frame(conn, env)
                except socket.timeout:
                    if not best_effort:
                        raise
        finally:
            sub.close()

    def close(self):
        self._stop.set()
        try:
            self._srv.close()
        finally:
            self._accept_thread.join(timeout=2)


class RemoteSubscription:
    """Client-side subscription; one dedicated socket per subscription."""

    def __init__(self, endpoint: str, topic: str, qos: QosProfile):
        self.topic = topic
        self.qos = qos
        self._sock = _connect(endpoint)
        request = Envelope(
            wire.CTL_SUBSCRIBE,
            0,
            now_ns(),
            now_ns(),
            ContentType.RAW_BYTES,
            json.dumps(
                {
                    "topic": topic,
                    "history_depth": qos.history_depth,
                    "reliability": qos.reliability.name,
                }
            ).encode("utf-8"),
        )
        wire.send_frame(self._sock, request)
        self._sock.settimeout(5.0)
        ack = wire.recv_frame(self._sock)
        if ack is None or ack.topic != wire.CTL_ACK:
            raise TransportError("broker did not confirm the subscription")
        self._closed = False
        self._lock = threading.Lock()

    @property
    def drop_count(self) -> int:
        return 0  # broker-side drops are not reported over the wire

    def get(self, timeout: Optional[float] = None) -> Optional[Envelope]:
        with self._lock:
            if self._closed:
                return None
            self._sock.settimeout(timeout)
            try:
                return wire.recv_frame(self._sock)
            except socket.timeout:
                return None
            except (TransportError, OSError):
                return None

    def close(self):
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class RemoteTransport:
    """Publish/subscribe against a BrokerServer; mirrors Transport's surface."""

    def __init__(self, endpoint: str, max_payload: int = DEFAULT_MAX_PAYLOAD):
        self.endpoint = endpoint
        self.max_payload = max_payload
        self._pub_sock: Optional[socket.socket] = None
        self._pub_lock = threading.Lock()
        self._subs: list[RemoteSubscription] = []
        self._closed = False

    def publish(
        self,
        topic: str,
        payload: bytes,
        content_type: ContentType = ContentType.RAW_BYTES,
        source_ts: Optional[int] = None,
    ) -> int:
        if self._closed:
            raise TransportClosed("transport is shut down")
        if len(payload) > self.max_payload:
            raise PayloadTooLarge(
                f"payload of {len(payload)} bytes exceeds limit {self.max_payload}"
            )
        ts = now_ns()
        env = Envelope(topic, 0, source_ts if source_ts is not None else ts, ts, content_type, bytes(payload))
        with self._pub_lock:
            if self._pub_sock is None:
                self._pub_sock = _connect(self.endpoint)
            wire.send_frame(self._pub_sock, env)
            ack = wire.recv_frame(self._pub_sock)
        if ack is None or ack.topic != wire.CTL_ACK:
            raise TransportError("publish was not acknowledged")
        return ack.seq

    def subscribe(self, topic: str, qos: QosProfile = QosProfile()) -> RemoteSubscription:
        if self._closed:
            raise TransportClosed("transport is shut down")
        sub = RemoteSubscription(self.endpoint, topic, qos)
        self._subs.append(sub)
        return sub

    def close(self):
        self._closed = True
        with self._pub_lock:
            if self._pub_sock is not None:
                self._pub_sock.close()
                self._pub_sock = None
        for sub in self._subs:
            sub.close()


def connect_transport(endpoint: str):
    """Endpoint factory: "inproc" -> new local Transport, otherwise remote."""
    if endpoint in ("inproc", "local"):
        return Transport()
    return RemoteTransport(endpoint)
