"""Bag format, synthetic bags, replay timing, measurement phases, report."""

from __future__ import annotations

import struct
import threading
import time

import pytest

from edgefaas.bench.bag import MAGIC, BagTopic, BagWriter, ReplayBag
from edgefaas.bench.measure import PhasePlan, measure
from edgefaas.bench.replay import replay
from edgefaas.bench.report import LabeledRun, format_summary, read_csv, summarize, write_boxplot, write_csv
from edgefaas.bench.synth import BoxSpec, CameraSegment, ImuSegment, SynthSpec, synth_bag
from edgefaas.bench.stats import stats
from edgefaas.errors import MalformedBag
from edgefaas.functions.brake_dark import mean_luminance
from edgefaas.payloads import RTT_TOPIC, RttRecord
from edgefaas.transport import ContentType, QosProfile, Transport


def small_spec(**overrides) -> SynthSpec:
    base = dict(
        imu_rate_hz=100.0,
        imu_segments=(ImuSegment(1.0, "smooth"),),
        camera_rate_hz=10.0,
        camera_segments=(CameraSegment(1.0, brightness=30),),
    )
    base.update(overrides)
    return SynthSpec(**base)


# -- bag format -----------------------------------------------------------------


def test_bag_roundtrip(tmp_path):
    path = tmp_path / "t.jblb"
    topics = [BagTopic("/a", ContentType.RAW_BYTES, {"k": 1}), BagTopic("/b", ContentType.IMU_SAMPLE)]
    with BagWriter(path, topics) as writer:
        writer.append(0, 100, b"one")
        writer.append(1, 200, b"two")
        writer.append(0, 200, b"three")
    bag = ReplayBag.load(path)
    assert [t.name for t in bag.topics] == ["/a", "/b"]
    assert bag.topics[0].metadata == {"k": 1}
    assert [(r.topic_index, r.timestamp_ns, r.payload) for r in bag.records] == [
        (0, 100, b"one"),
        (1, 200, b"two"),
        (0, 200, b"three"),
    ]


def test_bag_rejects_decreasing_timestamps(tmp_path):
    with BagWriter(tmp_path / "t.jblb", [BagTopic("/a", ContentType.RAW_BYTES)]) as writer:
        writer.append(0, 100, b"")
        with pytest.raises(ValueError):
            writer.append(0, 50, b"")


def test_bag_parse_reports_bad_offset():
    with pytest.raises(MalformedBag) as exc:
        ReplayBag.parse(b"NOPE" + b"\x00" * 10)
    assert exc.value.offset == 0

    # valid header, truncated record payload
    good = MAGIC + struct.pack("<H", 1) + struct.pack("<I", 1)
    good += struct.pack("<H", 2) + b"/a" + struct.pack("<B", 0) + struct.pack("<H", 2) + b"{}"
    record_head_offset = len(good)
    good += struct.pack("<IQI", 0, 100, 10) + b"short"
    with pytest.raises(MalformedBag) as exc:
        ReplayBag.parse(good)
    assert exc.value.offset == record_head_offset + 16


def test_bag_rejects_out_of_range_topic_index():
    data = MAGIC + struct.pack("<H", 1) + struct.pack("<I", 1)
    data += struct.pack("<H", 2) + b"/a" + struct.pack("<B", 0) + struct.pack("<H", 2) + b"{}"
    data += struct.pack("<IQI", 5, 100, 0)
    with pytest.raises(MalformedBag):
        ReplayBag.parse(data)


# -- synth ----------------------------------------------------------------------


def test_synth_record_counts(tmp_path):
    bag = ReplayBag.load(synth_bag(small_spec(), 1, tmp_path / "s.jblb"))
    assert len(bag.records_for("/imu")) == 100
    assert len(bag.records_for("/camera")) == 10


def test_synth_deterministic(tmp_path):
    a = synth_bag(small_spec(), 42, tmp_path / "a.jblb").read_bytes()
    b = synth_bag(small_spec(), 42, tmp_path / "b.jblb").read_bytes()
    assert a == b
    c = synth_bag(small_spec(), 43, tmp_path / "c.jblb").read_bytes()
    assert a != c


def test_synth_dark_frames_satisfy_luminance_condition(tmp_path):
    bag = ReplayBag.load(synth_bag(small_spec(), 7, tmp_path / "d.jblb"))
    for record in bag.records_for("/camera"):
        assert mean_luminance(record.payload) < 50


def test_synth_detection_frames_decode(tmp_path):
    from edgefaas.payloads import decode_detection_block

    spec = small_spec(
        camera_segments=(
            CameraSegment(1.0, brightness=128, boxes=(BoxSpec(2, 2, 20, 20, 0, 0.9),)),
        )
    )
    bag = ReplayBag.load(synth_bag(spec, 7, tmp_path / "m.jblb"))
    for record in bag.records_for("/camera"):
        boxes = decode_detection_block(record.payload)
        assert len(boxes) == 1
        assert boxes[0][4] == 0
        assert boxes[0][5] == pytest.approx(0.9, abs=1e-6)


# -- interchange import -----------------------------------------------------------


def test_convert_interchange_roundtrip(tmp_path):
    import base64
    import json

    from edgefaas.bench.convert import convert_interchange

    src = tmp_path / "recording"
    (src / "frames").mkdir(parents=True)
    (src / "frames" / "0.bin").write_bytes(b"frame-zero")
    lines = [
        json.dumps(
            {
                "topics": [
                    {"name": "/camera", "content_type": "image_frame", "metadata": {"width": 2}},
                    {"name": "/imu", "content_type": "imu_sample"},
                ]
            }
        ),
        json.dumps({"topic": "/camera", "timestamp_ns": 100, "payload_file": "frames/0.bin"}),
        json.dumps(
            {"topic": "/imu", "timestamp_ns": 150,
             "payload_b64": base64.b64encode(b"\x00" * 48).decode()}
        ),
    ]
    (src / "index.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    bag = ReplayBag.load(convert_interchange(src, tmp_path / "out.jblb"))
    assert [t.name for t in bag.topics] == ["/camera", "/imu"]
    assert bag.topics[0].metadata == {"width": 2}
    assert bag.records[0].payload == b"frame-zero"
    assert bag.records[1].timestamp_ns == 150


def test_convert_interchange_rejects_bad_lines(tmp_path):
    import json

    from edgefaas.bench.convert import convert_interchange
    from edgefaas.errors import BagError

    src = tmp_path / "recording"
    src.mkdir()
    (src / "index.jsonl").write_text(
        json.dumps({"topics": [{"name": "/a"}]}) + "\n" + json.dumps({"topic": "/a"}) + "\n",
        encoding="utf-8",
    )
    with pytest.raises(BagError, match="line 2"):
        convert_interchange(src, tmp_path / "out.jblb")


# -- replay ---------------------------------------------------------------------


def make_gap_bag(tmp_path, gaps_ms=(100, 200)):
    path = tmp_path / "gaps.jblb"
    with BagWriter(path, [BagTopic("/x", ContentType.RAW_BYTES)]) as writer:
        t = 0
        writer.append(0, 0, b"r0")
        for i, gap in enumerate(gaps_ms):
            t += gap * 1_000_000
            writer.append(0, t, b"r%d" % (i + 1))
    return path


def test_replay_preserves_gaps(tmp_path):
    path = make_gap_bag(tmp_path)
    transport = Transport()
    sub = transport.subscribe("/x", QosProfile(history_depth=16))
    report = replay(path, transport, speed=1.0)
    assert report.records_sent == 3
    arrivals = []
    for _ in range(3):
        env = sub.get(1)
        arrivals.append(env.publish_ts)
    gap1 = (arrivals[1] - arrivals[0]) / 1e6
    gap2 = (arrivals[2] - arrivals[1]) / 1e6
    assert gap1 == pytest.approx(100, rel=0.10)
    assert gap2 == pytest.approx(200, rel=0.10)
    transport.close()


def test_replay_speed_scales_gaps(tmp_path):
    path = make_gap_bag(tmp_path)
    transport = Transport()
    start = time.monotonic()
    replay(path, transport, speed=2.0)
    elapsed = time.monotonic() - start
    assert elapsed < 0.3  # 300ms of gaps at speed 2 ~ 150ms
    transport.close()


def test_replay_realign_stamps_fresh_source_ts(tmp_path):
    from edgefaas.clock import now_ns

    path = make_gap_bag(tmp_path, gaps_ms=(5, 5))
    transport = Transport()
    sub = transport.subscribe("/x", QosProfile(history_depth=16))
    t0 = now_ns()
    replay(path, transport, speed=1.0, realign=True)
    t1 = now_ns()
    for _ in range(3):
        env = sub.get(1)
        assert t0 <= env.source_ts <= t1
    transport.close()


def test_replay_no_realign_passes_original_timestamps(tmp_path):
    path = make_gap_bag(tmp_path, gaps_ms=(5, 5))
    transport = Transport()
    sub = transport.subscribe("/x", QosProfile(history_depth=16))
    replay(path, transport, speed=1.0, realign=False)
    assert [sub.get(1).source_ts for _ in range(3)] == [0, 5_000_000, 10_000_000]
    transport.close()


def test_replay_loop_stops_on_event(tmp_path):
    path = make_gap_bag(tmp_path, gaps_ms=(5, 5))
    transport = Transport()
    sub = transport.subscribe("/x", QosProfile(history_depth=1024))
    stop = threading.Event()
    result = {}

    def run():
        result["report"] = replay(path, transport, speed=1.0, loop=True, stop=stop)

    th = threading.Thread(target=run)
    th.start()
    time.sleep(0.2)
    stop.set()
    th.join(timeout=2)
    assert result["report"].records_sent > 3  # looped at least once
    transport.close()


# -- measure -----------------------------------------------------------------------


def publish_rtt(transport, function="fn", t_in=0, t_out=1_000_000):
    transport.publish(RTT_TOPIC, RttRecord(function, None, t_in, t_out).to_json(), ContentType.RTT_RECORD)


def test_measure_excludes_warmup_and_bins_phases():
    transport = Transport()
    plan = PhasePlan(warmup_s=0.3, phase_count=3, phase_length_s=0.3)
    emitted = {"count": 0}
    stop = threading.Event()

    def emitter():
        while not stop.is_set():
            publish_rtt(transport)
            emitted["count"] += 1
            time.sleep(0.02)

    th = threading.Thread(target=emitter)
    th.start()
    phases = measure(transport, plan)
    stop.set()
    th.join()
    transport.close()
    assert len(phases) == 3
    total = sum(len(p) for p in phases)
    # ~50 Hz emitter: warmup discards ~15, each phase holds ~15
    assert total < emitted["count"]
    for phase in phases:
        assert len(phase) >= 5


def test_measure_empty_phases_allowed():
    transport = Transport()
    plan = PhasePlan(warmup_s=0.05, phase_count=2, phase_length_s=0.05)
    phases = measure(transport, plan)
    transport.close()
    assert phases == [[], []]


# -- report ------------------------------------------------------------------------


def sample_runs():
    phase0 = [RttRecord("fn", None, 0, 2_000_000), RttRecord("fn", None, 0, 3_000_000)]
    phase1 = [RttRecord("fn", None, 0, 4_000_000)]
    return [LabeledRun("fn", "lambda", [phase0, phase1])]


def test_csv_roundtrip(tmp_path):
    path = write_csv(sample_runs(), tmp_path / "r.csv")
    rows = read_csv(path)
    assert len(rows) == 3
    assert rows[0]["function"] == "fn"
    assert rows[0]["implementation"] == "lambda"
    assert float(rows[0]["rtt_ms"]) == pytest.approx(2.0)
    assert {r["phase"] for r in rows} == {"0", "1"}


def test_summary_matches_stats():
    runs = sample_runs()
    rows = summarize(runs)
    pooled_row = next(r for r in rows if r["phase"] == "pooled")
    expected = stats([2.0, 3.0, 4.0])
    assert pooled_row["mean_ms"] == pytest.approx(expected.mean)
    assert pooled_row["mad_ms"] == pytest.approx(expected.mad)
    assert pooled_row["p95_ms"] == pytest.approx(expected.p95)
    assert "Mean" in format_summary(rows)


def test_boxplot_writes_png(tmp_path):
    path = write_boxplot(sample_runs(), tmp_path / "plot.png")
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 1000
