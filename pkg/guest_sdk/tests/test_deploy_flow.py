"""Guest package deployment through the registry/orchestrator/host chain."""

from __future__ import annotations

import io
import textwrap
import time
import zipfile

from edgefaas.orchestrator import BackoffPolicy, Orchestrator
from edgefaas.registry import OperatorClient, RegistryServer, RegistryStore, TokenFile


def wait_for(predicate, timeout=15.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return False


def guest_zip() -> bytes:
    script = textwrap.dedent(
        """
        def setup(params):
            pass

        def on_invoke(ctx):
            ctx.log("info", "tick")
        """
    )
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("function.py", script)
        zf.writestr("guest.json", '{"entry": "function.py", "sdk_version": 1}')
    return buf.getvalue()


def test_guest_archive_deploys_and_runs(tmp_path):
    tokens_path = tmp_path / "tokens.json"
    TokenFile.write(tokens_path, users={"op": "s3cret"}, vehicles={"veh-1": "vtoken"})
    server = RegistryServer(RegistryStore(tmp_path / "registry"), TokenFile(tokens_path))
    client = OperatorClient(server.ops_endpoint, "op", "s3cret")
    orch = Orchestrator(
        data_root=tmp_path / "edge",
        transport_endpoint="inproc",
        registry_endpoint=server.vehicles_endpoint,
        vehicle_id="veh-1",
        token="vtoken",
        policy=BackoffPolicy(initial_s=0.1, cap_s=0.5, max_restarts=3),
        stop_grace_s=2.0,
    )
    try:
        blob = guest_zip()
        stored = client.put_package(
            "ticker",
            "1",
            blob,
            kind="guest-archive",
            manifest_template={
                "name": "ticker",
                "version": "1",
                "mode": {"periodic": {"period_ms": 100}},
                "subscriptions": [],
                "params": {},
                "autostart": True,
                "entry": {"kind": "guest", "ref": "ticker"},
            },
        )
        client.set_deployment("veh-1", [{"name": "ticker", "version": "1"}])
        # the orchestrator must fetch the blob (its data root starts empty),
        # stage it content-addressed, and spawn a host that loads the guest
        assert wait_for(lambda: orch.supervisor.up_set() == {"ticker"})
        staged = tmp_path / "edge" / "packages" / stored["checksum"]
        assert staged.exists() and staged.read_bytes() == blob
        # the guest host must keep running (no crash loop), proving the load
        time.sleep(1.0)
        mp = orch.supervisor.process("ticker")
        assert mp.restart_count == 0
        assert orch.supervisor.up_set() == {"ticker"}
        # guest log lines travel host -> orchestrator -> registry
        assert wait_for(
            lambda: any(
                r["message"] == "tick" for r in server.store.query_logs("veh-1", function="ticker")
            ),
            timeout=15,
        )
    finally:
        orch.close()
        client.close()
        server.close()
