"""Data-plane semantics: KeepLast, ordering, fan-out, wire format, broker."""

from __future__ import annotations

import struct
import threading

import pytest

from edgefaas import wire
from edgefaas.broker import BrokerServer, RemoteTransport
from edgefaas.errors import PayloadTooLarge, TransportClosed
from edgefaas.transport import ContentType, Envelope, QosProfile, Reliability, Transport


@pytest.fixture
def transport():
    t = Transport()
    yield t
    t.close()


def test_publish_returns_monotonic_seq(transport):
    assert transport.publish("/t", b"a") == 0
    assert transport.publish("/t", b"b") == 1


def test_publish_without_subscribers_is_fine(transport):
    seq = transport.publish("/t", b"x")
    assert seq == 0
    stats = transport.topic_stats("/t")
    assert stats.published == 1
    assert stats.delivered == 0


def test_keep_last_two_drops_oldest(transport):
    sub = transport.subscribe("/t", QosProfile(history_depth=2))
    for payload in (b"1", b"2", b"3"):
        transport.publish("/t", payload)
    got = sub.drain()
    assert [e.payload for e in got] == [b"2", b"3"]
    assert sub.drop_count == 1


def test_volatile_durability_only_new_messages(transport):
    transport.publish("/t", b"early")
    sub = transport.subscribe("/t", QosProfile())
    transport.publish("/t", b"late")
    got = sub.drain()
    assert [e.payload for e in got] == [b"late"]


def test_keep_last_10_of_15(transport):
    sub = transport.subscribe("/t", QosProfile(history_depth=10))
    for i in range(15):
        transport.publish("/t", bytes([i]))
    got = sub.drain()
    assert [e.payload[0] for e in got] == list(range(5, 15))
    assert [e.seq for e in got] == list(range(5, 15))
    assert sub.drop_count == 5


def test_fan_out_same_seq(transport):
    sub_a = transport.subscribe("/t", QosProfile())
    sub_b = transport.subscribe("/t", QosProfile())
    transport.publish("/t", b"x")
    ea, eb = sub_a.get(1), sub_b.get(1)
    assert ea.seq == eb.seq == 0
    assert ea.payload == eb.payload == b"x"


def test_payload_size_limit():
    t = Transport(max_payload=8)
    with pytest.raises(PayloadTooLarge):
        t.publish("/t", b"123456789")
    t.close()


def test_publish_after_close_raises(transport):
    transport.close()
    with pytest.raises(TransportClosed):
        transport.publish("/t", b"x")


def test_concurrent_publishers_preserve_order_per_subscriber(transport):
    sub = transport.subscribe("/t", QosProfile(history_depth=100000))
    n_producers, per_producer = 4, 2000

    def produce():
        for _ in range(per_producer):
            transport.publish("/t", b"")

    threads = [threading.Thread(target=produce) for _ in range(n_producers)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    seqs = [e.seq for e in sub.drain()]
    assert len(seqs) == n_producers * per_producer
    assert seqs == sorted(seqs)
    assert seqs == list(range(n_producers * per_producer))


def test_stress_consumed_plus_dropped_equals_published(transport):
    sub = transport.subscribe("/t", QosProfile(history_depth=64))
    n_producers, per_producer = 4, 5000
    done = threading.Event()
    consumed = []

    def produce():
        for _ in range(per_producer):
            transport.publish("/t", b"")

    def consume():
        last_seq = -1
        while not done.is_set() or True:
            env = sub.get(timeout=0.05)
            if env is None:
                if done.is_set():
                    return
                continue
            assert env.seq > last_seq  # suffix-respecting subsequence
            last_seq = env.seq
            consumed.append(env.seq)

    consumer = threading.Thread(target=consume)
    consumer.start()
    producers = [threading.Thread(target=produce) for _ in range(n_producers)]
    for th in producers:
        th.start()
    for th in producers:
        th.join()
    done.set()
    consumer.join()
    total = n_producers * per_producer
    assert len(consumed) + sub.drop_count == total


# -- wire format ---------------------------------------------------------------


def test_wire_format_golden_bytes():
    env = Envelope("/imu", 7, 1000, 2000, ContentType.IMU_SAMPLE, b"\xde\xad")
    encoded = wire.encode_envelope(env)
    body = (
        struct.pack("<H", 4)
        + b"/imu"
        + struct.pack("<Q", 7)
        + struct.pack("<Q", 1000)
        + struct.pack("<Q", 2000)
        + struct.pack("<B", 1)
        + struct.pack("<I", 2)
        + b"\xde\xad"
    )
    assert encoded == struct.pack("<I", len(body)) + body


def test_wire_roundtrip():
    env = Envelope("/camera/front", 123456789, 10**15, 10**15 + 5, ContentType.IMAGE_FRAME, bytes(range(256)))
    assert wire.decode_envelope(wire.encode_envelope(env)[4:]) == env


# -- socket broker ---------------------------------------------------------------


@pytest.fixture
def broker():
    local = Transport()
    server = BrokerServer(local, "tcp:127.0.0.1:0")
    yield local, server
    server.close()
    local.close()


def test_remote_publish_assigns_server_seq(broker):
    local, server = broker
    remote = RemoteTransport(server.endpoint)
    local.publish("/t", b"first")
    assert remote.publish("/t", b"second") == 1
    assert remote.publish("/t", b"third") == 2
    remote.close()


def test_remote_subscribe_receives_local_publishes(broker):
    local, server = broker
    remote = RemoteTransport(server.endpoint)
    sub = remote.subscribe("/t", QosProfile(history_depth=16))
    local.publish("/t", b"hello", ContentType.RAW_BYTES, source_ts=42)
    env = sub.get(timeout=2)
    assert env is not None
    assert env.payload == b"hello"
    assert env.source_ts == 42
    assert env.seq == 0
    remote.close()


def test_remote_to_remote_roundtrip(broker):
    _, server = broker
    publisher = RemoteTransport(server.endpoint)
    subscriber = RemoteTransport(server.endpoint)
    sub = subscriber.subscribe("/x", QosProfile())
    for i in range(5):
        publisher.publish("/x", bytes([i]))
    got = [sub.get(timeout=2) for _ in range(5)]
    assert [e.payload[0] for e in got] == list(range(5))
    assert [e.seq for e in got] == list(range(5))
    publisher.close()
    subscriber.close()


def test_unix_socket_endpoint(tmp_path):
    local = Transport()
    server = BrokerServer(local, str(tmp_path / "plane.sock"))
    remote = RemoteTransport(server.endpoint)
    try:
        sub = remote.subscribe("/t", QosProfile())
        assert remote.publish("/t", b"over-unix") == 0
        env = sub.get(timeout=2)
        assert env is not None and env.payload == b"over-unix"
    finally:
        remote.close()
        server.close()
        local.close()


def test_best_effort_subscription_smoke(broker):
    _, server = broker
    remote = RemoteTransport(server.endpoint)
    sub = remote.subscribe("/t", QosProfile(history_depth=4, reliability=Reliability.BEST_EFFORT))
    remote.publish("/t", b"x")
    env = sub.get(timeout=2)
    assert env is not None and env.payload == b"x"
    remote.close()
