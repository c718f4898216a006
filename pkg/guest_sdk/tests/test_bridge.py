"""Guest loading, invocation marshaling, view lifetime, crash containment."""

from __future__ import annotations

import textwrap
import time
import zipfile

import pytest

from edgefaas.host import FunctionHost
from edgefaas.ingress import ChannelClass
from edgefaas.manifest import EntrySpec, FunctionManifest, SubscriptionSpec
from edgefaas.payloads import ACTIONS_TOPIC, TriggerAction
from edgefaas.transport import QosProfile, Transport
from edgefaas_guest import GuestPackageError, load_guest, resolve_package
from edgefaas_guest.package import load_module


def write_package(tmp_path, body: str, name: str = "pkg", meta: str | None = None):
    root = tmp_path / name
    root.mkdir()
    (root / "function.py").write_text(textwrap.dedent(body), encoding="utf-8")
    if meta is not None:
        (root / "guest.json").write_text(meta, encoding="utf-8")
    return root


NOOP_BODY = """
    def setup(params):
        pass

    def on_invoke(ctx):
        pass
"""


def wait_for(predicate, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.001)
    return False


def guest_manifest(ref: str, topic="/in", clazz=ChannelClass.LOW_VOLUME, depth=64, slot_size=4096):
    return FunctionManifest(
        name="guestfn",
        mode="event",
        trigger_topic=topic,
        subscriptions=(
            SubscriptionSpec(topic, clazz, depth, QosProfile(history_depth=256), slot_size=slot_size),
        ),
        entry=EntrySpec("guest", ref),
    )


@pytest.fixture
def transport():
    t = Transport()
    yield t
    t.close()


# -- package resolution -----------------------------------------------------------


def test_resolve_directory_package(tmp_path):
    root = write_package(tmp_path, NOOP_BODY)
    package = resolve_package(root)
    assert package.entry_script == root / "function.py"
    module = load_module(package)
    assert callable(module.setup) and callable(module.on_invoke)


def test_resolve_zip_archive(tmp_path):
    root = write_package(tmp_path, NOOP_BODY)
    archive = tmp_path / "pkg.zip"
    with zipfile.ZipFile(archive, "w") as zf:
        zf.write(root / "function.py", "function.py")
    package = resolve_package(archive)
    module = load_module(package)
    assert callable(module.on_invoke)


def test_resolve_missing_package(tmp_path):
    with pytest.raises(GuestPackageError):
        resolve_package(tmp_path / "nope")


def test_entry_override_via_metadata(tmp_path):
    root = tmp_path / "pkg"
    root.mkdir()
    (root / "main.py").write_text(textwrap.dedent(NOOP_BODY), encoding="utf-8")
    (root / "guest.json").write_text('{"entry": "main.py"}', encoding="utf-8")
    assert resolve_package(root).entry_script == root / "main.py"


def test_missing_handlers_rejected(tmp_path):
    root = write_package(tmp_path, "def setup(params):\n    pass\n")
    with pytest.raises(GuestPackageError, match="on_invoke"):
        load_module(resolve_package(root))


def test_future_sdk_version_rejected(tmp_path):
    root = write_package(tmp_path, NOOP_BODY, meta='{"sdk_version": 99}')
    with pytest.raises(GuestPackageError, match="sdk_version"):
        resolve_package(root)


def test_two_loads_are_isolated_namespaces(tmp_path):
    body = """
        counter = 0

        def setup(params):
            pass

        def on_invoke(ctx):
            global counter
            counter += 1
    """
    root = write_package(tmp_path, body)
    a = load_guest(str(root))
    b = load_guest(str(root))
    assert a.module is not b.module


# -- invocation through a real host --------------------------------------------------


def test_guest_noop_invocation_ok(tmp_path, transport):
    root = write_package(tmp_path, NOOP_BODY)
    host = FunctionHost(guest_manifest(str(root)), transport).load().start()
    actions = transport.subscribe(ACTIONS_TOPIC, QosProfile())
    transport.publish("/in", b"")
    assert wait_for(lambda: host.invocations == 1)
    host.stop()
    assert host.failures == 0
    assert host._body.last_result.ok
    assert actions.get(0.1) is None  # no side effects


def test_guest_exception_contained_and_counted(tmp_path, transport):
    body = """
        def setup(params):
            pass

        def on_invoke(ctx):
            raise ValueError("guest boom")
    """
    root = write_package(tmp_path, body)
    host = FunctionHost(guest_manifest(str(root)), transport).load().start()
    for _ in range(5):
        transport.publish("/in", b"")
        time.sleep(0.005)
    assert wait_for(lambda: host.failures == 5)
    assert host.state == "running"  # crash containment
    assert "guest boom" in host.last_error
    result = host._body.last_result
    assert not result.ok
    assert "ValueError: guest boom" in result.error_message
    assert "on_invoke" in result.error_traceback
    host.stop()


def test_guest_trigger_reaches_actions_topic(tmp_path, transport):
    body = """
        def setup(params):
            pass

        def on_invoke(ctx):
            ctx.trigger("mark", label="from-guest")
    """
    root = write_package(tmp_path, body)
    host = FunctionHost(guest_manifest(str(root)), transport).load().start()
    actions = transport.subscribe(ACTIONS_TOPIC, QosProfile())
    seq = transport.publish("/in", b"payload")
    assert wait_for(lambda: host.invocations == 1)
    host.stop()
    action = TriggerAction.from_json(actions.get(1).payload)
    assert action.action.value == "mark"
    assert action.label == "from-guest"
    assert action.function == "guestfn"
    assert action.cause_seq == seq


def test_frame_view_zero_copy_identity(tmp_path, transport):
    body = """
        import edgefaas_guest

        seen = {}

        def setup(params):
            pass

        def on_invoke(ctx):
            view = ctx.latest(ctx.trigger_topic)
            seen["bytes"] = bytes(view.data)
            seen["obj_id"] = id(view.data.obj)
            seen["readonly"] = view.data.readonly
    """
    root = write_package(tmp_path, body)
    manifest = guest_manifest(str(root), topic="/cam", clazz=ChannelClass.HIGH_VOLUME, depth=4)
    host = FunctionHost(manifest, transport).load().start()
    transport.publish("/cam", b"frame-bytes-123")
    assert wait_for(lambda: host.invocations == 1)
    seen = host._body.module.seen
    pool = host.hub.pool("/cam")
    host.stop()
    assert seen["bytes"] == b"frame-bytes-123"
    assert seen["readonly"] is True
    # the view aliased one of the pool's pre-allocated slots: zero copy
    assert seen["obj_id"] in {id(slot) for slot in pool._slots}


def test_frame_view_invalid_after_invocation(tmp_path, transport):
    body = """
        kept = {}

        def setup(params):
            pass

        def on_invoke(ctx):
            kept["view"] = ctx.latest(ctx.trigger_topic)
    """
    root = write_package(tmp_path, body)
    manifest = guest_manifest(str(root), topic="/cam", clazz=ChannelClass.HIGH_VOLUME, depth=4)
    host = FunctionHost(manifest, transport).load().start()
    transport.publish("/cam", b"frame")
    assert wait_for(lambda: host.invocations == 1)
    view = host._body.module.kept["view"]
    host.stop()
    with pytest.raises(ValueError):
        bytes(view.data)


def test_lease_counts_return_to_baseline(tmp_path, transport):
    body = """
        def setup(params):
            pass

        def on_invoke(ctx):
            ctx.latest(ctx.trigger_topic)
            ctx.latest(ctx.trigger_topic)  # two views, neither released by the guest
    """
    root = write_package(tmp_path, body)
    manifest = guest_manifest(str(root), topic="/cam", clazz=ChannelClass.HIGH_VOLUME, depth=4)
    host = FunctionHost(manifest, transport).load().start()
    pool = host.hub.pool("/cam")
    for i in range(5):
        transport.publish("/cam", b"frame%d" % i)
        assert wait_for(lambda: host.invocations == i + 1)
        # only the channel's own current-frame lease stays outstanding
        assert wait_for(lambda: pool.counters()["outstanding"] == 1)
    host.stop()


def test_low_volume_marshaling_fidelity(tmp_path, transport):
    body = """
        seen = []

        def setup(params):
            pass

        def on_invoke(ctx):
            rec = ctx.latest(ctx.trigger_topic)
            seen.append((rec.source_ts, rec.seq, rec.payload))
    """
    root = write_package(tmp_path, body)
    host = FunctionHost(guest_manifest(str(root)), transport).load().start()
    payload = bytes(range(48))
    seq = transport.publish("/in", payload, source_ts=123456789)
    assert wait_for(lambda: host.invocations == 1)
    host.stop()
    assert host._body.module.seen == [(123456789, seq, payload)]


def test_guest_infer_and_log_marshal_through(tmp_path, transport):
    body = """
        import numpy as np

        out = {}

        def setup(params):
            pass

        def on_invoke(ctx):
            rec = ctx.latest(ctx.trigger_topic)
            result = ctx.infer("mock-detector", {"frame": np.frombuffer(rec.payload, dtype=np.uint8)})
            out["shape"] = result["detections"].shape
            ctx.log("info", "guest inference done")
    """
    from edgefaas.payloads import encode_detection_block

    root = write_package(tmp_path, body)
    host = FunctionHost(guest_manifest(str(root)), transport).load().start()
    transport.publish("/in", encode_detection_block([(1, 2, 3, 4, 0, 0.9)]))
    assert wait_for(lambda: host.invocations == 1)
    host.stop()
    assert host._body.module.out["shape"] == (1, 6)
    assert host.failures == 0
