"""Binary wire format for envelopes on the inter-process transport.

Every frame on the socket is one envelope, length-prefixed:

    u32 LE   body length
    body:
        u16 LE   topic name length
        ...      topic name, UTF-8
        u64 LE   seq
        u64 LE   source_ts (monotonic ns)
        u64 LE   publish_ts (monotonic ns)
        u8       content_type
        u32 LE   payload length
        ...      payload bytes

Control operations between client and broker are ordinary envelopes on
reserved topics so that nothing but this encoding ever crosses the wire:

    /_ctl/subscribe   client -> broker, JSON payload
                      {"topic": ..., "history_depth": N, "reliability": ...}
    /_ctl/ack         broker -> client, seq = sequence assigned to the
                      client's most recent publish
"""

from __future__ import annotations

import socket
import struct

from .errors import TransportError
from .transport import ContentType, Envelope

CTL_SUBSCRIBE = "/_ctl/subscribe"
CTL_ACK = "/_ctl/ack"

_HEADER = struct.Struct("<I")
_FIXED = struct.Struct("<QQQBI")  # seq, source_ts, publish_ts, content_type, payload len


def encode_envelope(env: Envelope) -> bytes:
    name = env.topic.encode("utf-8")
    if len(name) > 0xFFFF:
        raise TransportError("topic name too long for wire format")
    body = b"".join(
        (
            struct.pack("<H", len(name)),
            name,
            _FIXED.pack(env.seq, env.source_ts, env.publish_ts, int(env.content_type), len(env.payload)),
            env.payload,
        )
    )
    return _HEADER.pack(len(body)) + body


def decode_envelope(body: bytes) -> Envelope:
    if len(body) < 2:
        raise TransportError("truncated envelope body")
    (name_len,) = struct.unpack_from("<H", body, 0)
    off = 2 + name_len
    topic = body[2:off].decode("utf-8")
    seq, source_ts, publish_ts, ctype, payload_len = _FIXED.unpack_from(body, off)
    off += _FIXED.size
    payload = body[off : off + payload_len]
    if len(payload) != payload_len:
        raise TransportError("truncated envelope payload")
    return Envelope(topic, seq, source_ts, publish_ts, ContentType(ctype), payload)


def send_frame(sock: socket.socket, env: Envelope) -> None:
    sock.sendall(encode_envelope(env))


def recv_exact(sock: socket.socket, n: int) -> bytes | None:
    """Read exactly n bytes; None on clean EOF at a frame boundary."""
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            if got == 0:
                return None
            raise TransportError("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> Envelope | None:
    header = recv_exact(sock, _HEADER.size)
    if header is None:
        return None
    (length,) = _HEADER.unpack(header)
    body = recv_exact(sock, length)
    if body is None:
        raise TransportError("connection closed mid-frame")
    return decode_envelope(body)
