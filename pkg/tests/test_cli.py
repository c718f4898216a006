"""CLI surface: exit codes, config handling, bag/bench/deploy subcommands."""

from __future__ import annotations

import json

import pytest

from edgefaas.cli import EXIT_AUTH, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_parser, main
from edgefaas.registry import RegistryServer, RegistryStore, TokenFile


@pytest.fixture
def synth_spec_file(tmp_path):
    spec = {
        "imu": {"rate_hz": 100, "segments": [{"duration_s": 0.5, "profile": "smooth"}]},
        "camera": {
            "rate_hz": 10,
            "width": 16,
            "height": 16,
            "segments": [{"duration_s": 0.5, "brightness": 40}],
        },
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec), encoding="utf-8")
    return path


def test_bag_synth_and_info(tmp_path, synth_spec_file, capsys):
    bag_path = tmp_path / "out.jblb"
    assert main(["bag", "synth", "--spec", str(synth_spec_file), "--seed", "3", "--out", str(bag_path)]) == EXIT_OK
    assert main(["bag", "info", "--bag", str(bag_path)]) == EXIT_OK
    out = capsys.readouterr().out
    info = json.loads(out[out.index("{") :])
    by_name = {t["name"]: t for t in info["topics"]}
    assert by_name["/imu"]["records"] == 50
    assert by_name["/camera"]["records"] == 5
    assert info["records"] == 55


def test_usage_error_exit_code():
    assert main(["bag", "synth", "--seed", "1"]) == EXIT_USAGE  # missing required flags
    assert main(["bench", "run", "--bag", "x", "--manifests", "y", "--plan", "zzz", "--out-dir", "o"]) == EXIT_USAGE


def test_runtime_error_exit_code(tmp_path):
    assert main(["bag", "info", "--bag", str(tmp_path / "missing.jblb")]) == EXIT_RUNTIME


def test_auth_failure_exit_code(tmp_path):
    tokens = tmp_path / "tokens.json"
    TokenFile.write(tokens, users={"op": "right"}, vehicles={})
    server = RegistryServer(RegistryStore(tmp_path / "data"), TokenFile(tokens))
    try:
        code = main(
            ["deploy", "list", "--registry", server.ops_endpoint, "--user", "op", "--token", "wrong"]
        )
        assert code == EXIT_AUTH
    finally:
        server.close()


def test_deploy_roundtrip_via_cli(tmp_path, capsys):
    tokens = tmp_path / "tokens.json"
    TokenFile.write(tokens, users={"op": "s3cret"}, vehicles={"veh-1": "v"})
    server = RegistryServer(RegistryStore(tmp_path / "data"), TokenFile(tokens))
    try:
        template = tmp_path / "template.json"
        template.write_text(json.dumps({"name": "n1"}), encoding="utf-8")
        code = main(
            [
                "deploy", "put",
                "--registry", server.ops_endpoint,
                "--user", "op", "--token", "s3cret",
                "--name", "n1", "--version", "1",
                "--builtin", "noop",
                "--manifest-template", str(template),
            ]
        )
        assert code == EXIT_OK
        code = main(
            [
                "deploy", "set",
                "--registry", server.ops_endpoint,
                "--user", "op", "--token", "s3cret",
                "--vehicle", "veh-1",
                "--functions", json.dumps([{"name": "n1", "version": "1"}]),
            ]
        )
        assert code == EXIT_OK
        assert "revision 1" in capsys.readouterr().out
        assert main(
            ["deploy", "list", "--registry", server.ops_endpoint, "--user", "op", "--token", "s3cret"]
        ) == EXIT_OK
    finally:
        server.close()


def test_config_file_unknown_keys_rejected(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"transport": "inproc", "bogus": 1}), encoding="utf-8")
    assert main(["--config", str(config), "bag", "info", "--bag", "x"]) == EXIT_USAGE


def test_config_file_supplies_transport(tmp_path, synth_spec_file):
    bag_path = tmp_path / "b.jblb"
    main(["bag", "synth", "--spec", str(synth_spec_file), "--seed", "1", "--out", str(bag_path)])
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"transport": "inproc"}), encoding="utf-8")
    assert main(["--config", str(config), "bag", "replay", "--bag", str(bag_path), "--speed", "50"]) == EXIT_OK


def test_bench_stats_and_compare_and_plot(tmp_path, capsys):
    from edgefaas.bench.report import LabeledRun, write_csv
    from edgefaas.payloads import RttRecord

    runs_a = [LabeledRun("fn", "lambda", [[RttRecord("fn", None, 0, (i + 1) * 1_000_000) for i in range(20)]])]
    runs_b = [LabeledRun("fn", "native", [[RttRecord("fn", None, 0, (i + 30) * 1_000_000) for i in range(20)]])]
    csv_a = write_csv(runs_a, tmp_path / "a.csv")
    csv_b = write_csv(runs_b, tmp_path / "b.csv")

    assert main(["bench", "stats", "--csv", str(csv_a)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "lambda" in out and "Mean" in out

    assert main(["bench", "compare", "--csv-a", str(csv_a), "--csv-b", str(csv_b)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "p_two_sided" in out

    plot_path = tmp_path / "p.png"
    assert main(["plot", "--csv", str(csv_a), "--out", str(plot_path)]) == EXIT_OK
    assert plot_path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_bench_run_end_to_end_smoke(tmp_path, capsys):
    """Replay a rough IMU bag through the roughness lambda via the CLI."""
    spec = {
        "imu": {
            "rate_hz": 100,
            "segments": [{"duration_s": 4.0, "profile": "rough", "rough_amplitude": 2.0}],
        }
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec), encoding="utf-8")
    bag_path = tmp_path / "rough.jblb"
    assert main(["bag", "synth", "--spec", str(spec_path), "--seed", "5", "--out", str(bag_path)]) == EXIT_OK

    manifest = {
        "name": "rough",
        "version": "1",
        "mode": {"event": {"trigger_topic": "/imu"}},
        "subscriptions": [
            {"topic": "/imu", "class": "low_volume", "depth_or_slots": 512,
             "qos": {"history_depth": 1024, "reliability": "reliable"}}
        ],
        "params": {"start_threshold": "1.0"},
        "autostart": False,
        "entry": {"kind": "native", "ref": "imu_fft"},
    }
    manifest_path = tmp_path / "rough_manifest.json"
    manifest_path.write_text(json.dumps(manifest), encoding="utf-8")

    out_dir = tmp_path / "bench_out"
    code = main(
        [
            "bench", "run",
            "--bag", str(bag_path),
            "--manifests", str(manifest_path),
            "--plan", "1,3,1",
            "--out-dir", str(out_dir),
        ]
    )
    assert code == EXIT_OK
    assert (out_dir / "rtt.csv").exists()
    assert (out_dir / "summary.txt").exists()
    assert (out_dir / "rtt_boxplot.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    out = capsys.readouterr().out
    assert "rough" in out and "Mean" in out


def _iter_parser_actions(parser, prefix=()):
    import argparse

    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for name, sub in action.choices.items():
                yield from _iter_parser_actions(sub, prefix + (name,))
        elif action.option_strings:
            yield prefix, action


def test_help_documents_every_flag():
    parser = build_parser()
    seen = []
    for prefix, action in _iter_parser_actions(parser):
        if action.help is None and "--help" not in action.option_strings:
            seen.append((prefix, action.option_strings))
    assert not seen, f"flags without help text: {seen}"
