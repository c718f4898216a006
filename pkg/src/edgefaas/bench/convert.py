"""Best-effort import of external recordings via a simple interchange format.

The interchange is a directory holding ``index.jsonl`` plus raw payload
files. The first line of the index declares the topic table; every following
line is one record, in non-decreasing timestamp order:

    {"topics": [{"name": "/imu", "content_type": "imu_sample",
                 "metadata": {"rate_hz": 100}}]}
    {"topic": "/imu", "timestamp_ns": 1000, "payload_file": "imu/0000.bin"}
    {"topic": "/imu", "timestamp_ns": 2000, "payload_b64": "AAAA..."}

``payload_file`` paths are relative to the index file; ``payload_b64`` inlines
small payloads. Exporters for specific datasets or bag formats only need to
emit this interchange, keeping the converter dataset-agnostic.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

from ..errors import BagError
from ..transport import ContentType
from .bag import BagTopic, BagWriter

CONTENT_TYPES = {ct.name.lower(): ct for ct in ContentType}


def convert_interchange(index_path: str | Path, out_path: str | Path) -> Path:
    """Build a bag from an interchange index; returns the bag path."""
    index_path = Path(index_path)
    if index_path.is_dir():
        index_path = index_path / "index.jsonl"
    if not index_path.exists():
        raise BagError(f"interchange index {str(index_path)!r} does not exist")
    base = index_path.parent
    lines = index_path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise BagError("interchange index is empty")
    try:
        header = json.loads(lines[0])
        declared = header["topics"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise BagError(f"first index line must declare topics: {exc}") from exc
    topics = []
    index_of = {}
    for t in declared:
        ct_name = t.get("content_type", "raw_bytes")
        ct = CONTENT_TYPES.get(ct_name)
        if ct is None:
            raise BagError(f"unknown content_type {ct_name!r} for topic {t.get('name')!r}")
        index_of[t["name"]] = len(topics)
        topics.append(BagTopic(t["name"], ct, t.get("metadata", {})))
    out_path = Path(out_path)
    with BagWriter(out_path, topics) as writer:
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                topic_index = index_of[rec["topic"]]
                ts = int(rec["timestamp_ns"])
                if "payload_file" in rec:
                    payload = (base / rec["payload_file"]).read_bytes()
                elif "payload_b64" in rec:
                    payload = base64.b64decode(rec["payload_b64"])
                else:
                    raise KeyError("payload_file or payload_b64")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, OSError) as exc:
                raise BagError(f"index line {lineno}: {exc}") from exc
            try:
                writer.append(topic_index, ts, payload)
            except ValueError as exc:
                raise BagError(f"index line {lineno}: {exc}") from exc
    return out_path
