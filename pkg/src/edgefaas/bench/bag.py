"""Replay bag file format: a flat, seekable record log for sensor data.

Layout (all integers little-endian):

    4 bytes   magic "JBLB"
    u16       version (currently 1)
    u32       topic count
    per topic:
        u16   name length, then UTF-8 name
        u8    content_type
        u16   metadata length, then UTF-8 JSON (e.g. image geometry
              {"height": ..., "width": ..., "channels": ...})
    records until EOF:
        u32   topic index
        u64   timestamp_ns
        u32   payload length, then payload

Record timestamps must be non-decreasing and topic indices must be within
the table. Parse errors report the offset of the first bad byte.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterator

from ..errors import MalformedBag
from ..transport import ContentType

MAGIC = b"JBLB"
VERSION = 1

_RECORD_HEAD = struct.Struct("<IQI")


@dataclass(frozen=True)
class BagTopic:
    name: str
    content_type: ContentType
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BagRecord:
    topic_index: int
    timestamp_ns: int
    payload: bytes


class BagWriter:
    """Writes a bag with a fixed topic table declared up front."""

    def __init__(self, path: str | Path, topics: list[BagTopic]):
        self.path = Path(path)
        self.topics = list(topics)
        self._fh: BinaryIO = open(self.path, "wb")
        self._last_ts = 0
        self._count = 0
        self._fh.write(MAGIC)
        self._fh.write(struct.pack("<H", VERSION))
        self._fh.write(struct.pack("<I", len(self.topics)))
        for t in self.topics:
            name = t.name.encode("utf-8")
            meta = json.dumps(t.metadata, sort_keys=True).encode("utf-8") if t.metadata else b"{}"
            self._fh.write(struct.pack("<H", len(name)))
            self._fh.write(name)
            self._fh.write(struct.pack("<B", int(t.content_type)))
            self._fh.write(struct.pack("<H", len(meta)))
            self._fh.write(meta)

    def append(self, topic_index: int, timestamp_ns: int, payload: bytes) -> None:
        if not 0 <= topic_index < len(self.topics):
            raise ValueError(f"topic index {topic_index} out of range")
        if timestamp_ns < self._last_ts:
            raise ValueError("record timestamps must be non-decreasing")
        self._last_ts = timestamp_ns
        self._count += 1
        self._fh.write(_RECORD_HEAD.pack(topic_index, timestamp_ns, len(payload)))
        self._fh.write(payload)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ReplayBag:
    """Parsed bag: topic table plus an in-memory record list."""

    def __init__(self, topics: list[BagTopic], records: list[BagRecord]):
        self.topics = topics
        self.records = records

    @classmethod
    def load(cls, path: str | Path) -> "ReplayBag":
        data = Path(path).read_bytes()
        return cls.parse(data)

    @classmethod
    def parse(cls, data: bytes) -> "ReplayBag":
        buf = io.BytesIO(data)

        def need(n: int, what: str) -> bytes:
            off = buf.tell()
            chunk = buf.read(n)
            if len(chunk) != n:
                raise MalformedBag(f"truncated {what}", off)
            return chunk

        if need(4, "magic") != MAGIC:
            raise MalformedBag("bad magic", 0)
        (version,) = struct.unpack("<H", need(2, "version"))
        if version != VERSION:
            raise MalformedBag(f"unsupported version {version}", 4)
        (topic_count,) = struct.unpack("<I", need(4, "topic count"))
        topics = []
        for _ in range(topic_count):
            (name_len,) = struct.unpack("<H", need(2, "topic name length"))
            name = need(name_len, "topic name").decode("utf-8")
            (ctype,) = struct.unpack("<B", need(1, "content type"))
            (meta_len,) = struct.unpack("<H", need(2, "metadata length"))
            meta_off = buf.tell()
            raw_meta = need(meta_len, "metadata")
            try:
                metadata = json.loads(raw_meta.decode("utf-8")) if meta_len else {}
            except (json.JSONDecodeError, UnicodeDecodeError):
                raise MalformedBag("metadata is not valid JSON", meta_off)
            try:
                content_type = ContentType(ctype)
            except ValueError:
                raise MalformedBag(f"unknown content type {ctype}", meta_off - 3)
            topics.append(BagTopic(name, content_type, metadata))
        records = []
        last_ts = 0
        while True:
            head_off = buf.tell()
            head = buf.read(_RECORD_HEAD.size)
            if not head:
                break
            if len(head) != _RECORD_HEAD.size:
                raise MalformedBag("truncated record header", head_off)
            topic_index, ts, payload_len = _RECORD_HEAD.unpack(head)
            if topic_index >= topic_count:
                raise MalformedBag(f"topic index {topic_index} out of range", head_off)
            if ts < last_ts:
                raise MalformedBag("record timestamps decrease", head_off + 4)
            last_ts = ts
            payload = need(payload_len, "record payload")
            records.append(BagRecord(topic_index, ts, payload))
        return cls(topics, records)

    def __iter__(self) -> Iterator[BagRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def records_for(self, topic_name: str) -> list[BagRecord]:
        idx = {t.name: i for i, t in enumerate(self.topics)}.get(topic_name)
        return [r for r in self.records if r.topic_index == idx]

    def describe(self) -> dict:
        counts = [0] * len(self.topics)
        for r in self.records:
            counts[r.topic_index] += 1
        return {
            "topics": [
                {
                    "name": t.name,
                    "content_type": t.content_type.name.lower(),
                    "metadata": t.metadata,
                    "records": counts[i],
                }
                for i, t in enumerate(self.topics)
            ],
            "records": len(self.records),
            "duration_ns": (self.records[-1].timestamp_ns - self.records[0].timestamp_ns)
            if self.records
            else 0,
        }
