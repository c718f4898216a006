"""Single entry point for operators and CI.

Subcommands:
    registry serve          run the cloud registry
    orchestrator run        run the edge orchestrator
    host run                run one function host (standalone dev mode)
    deploy put|set|list     operator client against the registry
    bag synth|info|replay   bag tooling
    bench run|stats|compare benchmark loop, CSV statistics, significance test
    plot                    box plot from a benchmark CSV

Exit codes: 0 ok, 1 usage error, 2 runtime failure, 3 authentication failure.
Global flags may also come from a JSON config file (--config); command-line
values override file values, unknown config keys are rejected.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
from pathlib import Path

from .errors import AuthFailed, EdgeFaasError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_AUTH = 3

CONFIG_KEYS = {"transport", "log_level"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 1
        raise _UsageError(message)


def _bool_flag(value: str) -> bool:
    if value.lower() in ("true", "1", "yes", "on"):
        return True
    if value.lower() in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="edgefaas", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="JSON config file with global defaults")
    parser.add_argument("--log-level", default=None, help="log verbosity: debug|info|warn|error")
    parser.add_argument("--transport", default=None, help="transport endpoint (inproc, tcp:HOST:PORT, or socket path)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("registry", help="cloud registry").add_subparsers(dest="action", required=True)
    serve = p.add_parser("serve", help="serve the registry until interrupted")
    serve.add_argument("--listen-vehicles", default="tcp:127.0.0.1:7410", help="vehicle channel endpoint")
    serve.add_argument("--listen-ops", default="tcp:127.0.0.1:7411", help="operator endpoint")
    serve.add_argument("--data-dir", required=True, help="persistence directory")
    serve.add_argument("--tokens-file", required=True, help="JSON token hashes file")

    p = sub.add_parser("orchestrator", help="edge orchestrator").add_subparsers(dest="action", required=True)
    run = p.add_parser("run", help="run the orchestrator until interrupted")
    run.add_argument("--transport", default=argparse.SUPPRESS, help="transport endpoint passed to hosts")
    run.add_argument("--registry", default=None, help="registry vehicle endpoint")
    run.add_argument("--vehicle-id", required=True, help="this vehicle's id")
    run.add_argument("--token", default="", help="vehicle auth token")
    run.add_argument("--data-root", required=True, help="staging/cache directory")
    run.add_argument("--instrument-rtt", type=_bool_flag, default=False, help="enable RTT instrumentation in hosts")

    p = sub.add_parser("host", help="function host").add_subparsers(dest="action", required=True)
    run = p.add_parser("run", help="run one function host (standalone dev mode)")
    run.add_argument("--manifest", required=True, help="path to the function manifest JSON")
    run.add_argument("--transport", default=argparse.SUPPRESS, help="transport endpoint for subscriptions")
    run.add_argument("--orchestrator-channel", default="none", help="status channel endpoint or 'none'")
    run.add_argument("--instrument-rtt", type=_bool_flag, default=False, help="publish RTT records per trigger")
    run.add_argument("--affinity", default=None, help="comma-separated CPU core ids")
    run.add_argument("--print-actions", action="store_true", help="log trigger actions to stdout (recorder stub)")

    p = sub.add_parser("deploy", help="operator client").add_subparsers(dest="action", required=True)
    for name in ("put", "set", "list"):
        d = p.add_parser(name, help=f"deploy {name}")
        d.add_argument("--registry", required=True, help="registry operator endpoint")
        d.add_argument("--user", required=True, help="operator user name")
        d.add_argument("--token", required=True, help="operator token")
        if name == "put":
            d.add_argument("--name", required=True, help="package name")
            d.add_argument("--version", required=True, help="package version")
            d.add_argument("--file", default=None, help="guest package archive to upload")
            d.add_argument("--builtin", default=None, help="native builtin id instead of a file")
            d.add_argument("--manifest-template", default=None, help="manifest template JSON file")
        elif name == "set":
            d.add_argument("--vehicle", required=True, help="target vehicle id")
            d.add_argument("--functions", required=True, help='JSON list: [{"name","version",...}]')

    p = sub.add_parser("bag", help="bag tooling").add_subparsers(dest="action", required=True)
    synth = p.add_parser("synth", help="generate a deterministic synthetic bag")
    synth.add_argument("--spec", required=True, help="synthesis spec JSON file")
    synth.add_argument("--seed", type=int, default=0, help="RNG seed")
    synth.add_argument("--out", required=True, help="output bag path")
    info = p.add_parser("info", help="print topic table and record counts")
    info.add_argument("--bag", required=True, help="bag path")
    imp = p.add_parser("import", help="convert a JSON-lines interchange recording into a bag")
    imp.add_argument("--index", required=True, help="interchange directory or index.jsonl path")
    imp.add_argument("--out", required=True, help="output bag path")
    rep = p.add_parser("replay", help="replay a bag onto the transport")
    rep.add_argument("--bag", required=True, help="bag path")
    rep.add_argument("--transport", default=argparse.SUPPRESS, help="transport endpoint to publish on")
    rep.add_argument("--speed", type=float, default=1.0, help="replay speed factor")
    rep.add_argument("--realign", type=_bool_flag, default=True, help="stamp source_ts at send")
    rep.add_argument("--loop", type=_bool_flag, default=False, help="restart from the first record")

    p = sub.add_parser("bench", help="benchmark loop and statistics").add_subparsers(dest="action", required=True)
    run = p.add_parser("run", help="replay + measure + report end-to-end")
    run.add_argument("--bag", required=True, help="bag path")
    run.add_argument("--manifests", required=True, nargs="+", help="function manifest JSON paths")
    run.add_argument("--plan", default="20,3,20", help="warmup_s,phase_count,phase_length_s")
    run.add_argument("--speed", type=float, default=1.0, help="replay speed factor")
    run.add_argument("--implementation", default="lambda", help="implementation label in the report")
    run.add_argument("--out-dir", required=True, help="output directory for CSV/summary/plot")
    st = p.add_parser("stats", help="summary statistics from a benchmark CSV")
    st.add_argument("--csv", required=True, help="benchmark CSV path")
    cmp_ = p.add_parser("compare", help="Mann-Whitney U between two benchmark CSVs")
    cmp_.add_argument("--csv-a", required=True, help="first CSV")
    cmp_.add_argument("--csv-b", required=True, help="second CSV")

    plot = sub.add_parser("plot", help="box plot from a benchmark CSV")
    plot.add_argument("--csv", required=True, help="benchmark CSV path")
    plot.add_argument("--out", required=True, help="output image path")

    return parser


def _apply_config(args: argparse.Namespace) -> None:
    if not args.config:
        if args.transport is None:
            args.transport = "inproc"
        return
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise _UsageError(f"unknown config keys: {sorted(unknown)}")
    if args.transport is None:
        args.transport = doc.get("transport", "inproc")
    if args.log_level is None:
        args.log_level = doc.get("log_level")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _dispatch(args)
    except AuthFailed as exc:
        print(f"authentication failed: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EdgeFaasError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _dispatch(args: argparse.Namespace) -> int:
    handler = {
        ("registry", "serve"): _registry_serve,
        ("orchestrator", "run"): _orchestrator_run,
        ("host", "run"): _host_run,
        ("deploy", "put"): _deploy_put,
        ("deploy", "set"): _deploy_set,
        ("deploy", "list"): _deploy_list,
        ("bag", "synth"): _bag_synth,
        ("bag", "info"): _bag_info,
        ("bag", "import"): _bag_import,
        ("bag", "replay"): _bag_replay,
        ("bench", "run"): _bench_run,
        ("bench", "stats"): _bench_stats,
        ("bench", "compare"): _bench_compare,
        ("plot", None): _plot,
    }[(args.command, getattr(args, "action", None))]
    return handler(args)


def _wait_for_interrupt(stop_callbacks) -> None:
    stop = threading.Event()

    def handler(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, handler)
    signal.signal(signal.SIGTERM, handler)
    while not stop.wait(0.2):
        pass
    for cb in stop_callbacks:
        cb()


# -- registry / orchestrator / host ------------------------------------------------


def _registry_serve(args) -> int:
    from .registry import RegistryServer, RegistryStore, TokenFile

    store = RegistryStore(args.data_dir)
    server = RegistryServer(store, TokenFile(args.tokens_file), args.listen_vehicles, args.listen_ops)
    print(f"registry serving vehicles on {server.vehicles_endpoint}, ops on {server.ops_endpoint}", flush=True)
    _wait_for_interrupt([server.close])
    return EXIT_OK


def _orchestrator_run(args) -> int:
    from .orchestrator import AUTH_REJECTED_EXIT_CODE, Orchestrator

    orch = Orchestrator(
        data_root=args.data_root,
        transport_endpoint=args.transport,
        registry_endpoint=args.registry,
        vehicle_id=args.vehicle_id,
        token=args.token,
        instrument_rtt=args.instrument_rtt,
    )
    if args.registry is None:
        orch.boot_offline_autostart()
    print(f"orchestrator running, host channel {orch.listener.endpoint}", flush=True)
    stop = threading.Event()

    def handler(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, handler)
    signal.signal(signal.SIGTERM, handler)
    while not stop.wait(0.2):
        if orch.link is not None and orch.link.auth_rejected.is_set():
            orch.close()
            return AUTH_REJECTED_EXIT_CODE
    orch.close()
    return EXIT_OK


def _host_run(args) -> int:
    import socket as socket_mod

    from .broker import connect_transport
    from .control import ControlChannel
    from .host import FunctionHost
    from .manifest import FunctionManifest
    from .payloads import ACTIONS_TOPIC, TriggerAction
    from .transport import QosProfile

    if args.affinity:
        cores = {int(c) for c in args.affinity.split(",")}
        try:
            import os

            os.sched_setaffinity(0, cores)
        except (AttributeError, OSError) as exc:
            print(f"affinity request ignored: {exc}", file=sys.stderr)

    manifest = FunctionManifest.load(args.manifest)
    transport = connect_transport(args.transport)
    channel = None
    if args.orchestrator_channel and args.orchestrator_channel != "none":
        host_part, _, port = args.orchestrator_channel[4:].rpartition(":")
        channel = ControlChannel(
            socket_mod.create_connection((host_part or "127.0.0.1", int(port)), timeout=5)
        )
    host = FunctionHost(manifest, transport, channel, instrument_rtt=args.instrument_rtt)
    try:
        host.load()
    except EdgeFaasError as exc:
        print(f"host failed to load: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    printer = None
    if args.print_actions:
        actions = transport.subscribe(ACTIONS_TOPIC, QosProfile(history_depth=64))

        def print_actions():
            while host.state == "running":
                env = actions.get(timeout=0.2)
                if env is not None:
                    act = TriggerAction.from_json(env.payload)
                    print(f"action {act.action.value} from {act.function} label={act.label!r}", flush=True)

        printer = threading.Thread(target=print_actions, daemon=True)
        printer.start()

    def handler(signum, frame):
        host.stop()

    signal.signal(signal.SIGINT, handler)
    signal.signal(signal.SIGTERM, handler)
    host.run()
    return EXIT_OK


# -- deploy -------------------------------------------------------------------------


def _ops_client(args):
    from .registry import OperatorClient

    return OperatorClient(args.registry, args.user, args.token)


def _deploy_put(args) -> int:
    from .registry.store import GUEST_KIND, NATIVE_KIND, native_ref_blob

    if bool(args.file) == bool(args.builtin):
        raise _UsageError("exactly one of --file or --builtin is required")
    if args.file:
        blob, kind = Path(args.file).read_bytes(), GUEST_KIND
    else:
        blob, kind = native_ref_blob(args.builtin), NATIVE_KIND
    template = {}
    if args.manifest_template:
        template = json.loads(Path(args.manifest_template).read_text(encoding="utf-8"))
    with _ops_client(args) as client:
        stored = client.put_package(args.name, args.version, blob, kind, template)
    print(json.dumps(stored, indent=2))
    return EXIT_OK


def _deploy_set(args) -> int:
    functions = json.loads(args.functions)
    with _ops_client(args) as client:
        revision = client.set_deployment(args.vehicle, functions)
    print(f"revision {revision}")
    return EXIT_OK


def _deploy_list(args) -> int:
    with _ops_client(args) as client:
        print(json.dumps(client.list(), indent=2))
    return EXIT_OK


# -- bag ----------------------------------------------------------------------------


def _bag_synth(args) -> int:
    from .bench.synth import SynthSpec, synth_bag

    spec = SynthSpec.from_json_file(args.spec)
    path = synth_bag(spec, args.seed, args.out)
    print(f"wrote {path}")
    return EXIT_OK


def _bag_import(args) -> int:
    from .bench.convert import convert_interchange

    path = convert_interchange(args.index, args.out)
    print(f"wrote {path}")
    return EXIT_OK


def _bag_info(args) -> int:
    from .bench.bag import ReplayBag

    print(json.dumps(ReplayBag.load(args.bag).describe(), indent=2))
    return EXIT_OK


def _bag_replay(args) -> int:
    from .bench.replay import replay
    from .broker import connect_transport

    transport = connect_transport(args.transport)
    report = replay(args.bag, transport, speed=args.speed, realign=args.realign, loop=args.loop)
    print(f"sent {report.records_sent} records in {report.duration_s:.2f}s")
    return EXIT_OK


# -- bench --------------------------------------------------------------------------


def _parse_plan(text: str):
    from .bench.measure import PhasePlan

    try:
        warmup, count, length = text.split(",")
        return PhasePlan(float(warmup), int(count), float(length))
    except ValueError as exc:
        raise _UsageError(f"bad --plan {text!r}: {exc}")


def _bench_run(args) -> int:
    from .bench import run_benchmark

    plan = _parse_plan(args.plan)
    out_dir = Path(args.out_dir)
    result = run_benchmark(
        bag_path=args.bag,
        manifest_paths=args.manifests,
        plan=plan,
        speed=args.speed,
        implementation=args.implementation,
        out_dir=out_dir,
    )
    print(result["summary_text"])
    print(f"csv: {result['csv']}\nplot: {result['plot']}")
    return EXIT_OK


def _group_csv_rows(rows):
    from .payloads import RttRecord

    groups: dict[tuple[str, str], dict[int, list[RttRecord]]] = {}
    for row in rows:
        key = (row["function"], row["implementation"])
        phase = int(row["phase"])
        groups.setdefault(key, {}).setdefault(phase, []).append(
            RttRecord(row["function"], None, int(row["t_in_ns"]), int(row["t_out_ns"]))
        )
    return groups


def _bench_stats(args) -> int:
    from .bench.report import LabeledRun, format_summary, read_csv, summarize

    rows = read_csv(args.csv)
    if not rows:
        raise EdgeFaasError("CSV has no records")
    runs = [
        LabeledRun(fn, impl, [phases[i] for i in sorted(phases)])
        for (fn, impl), phases in _group_csv_rows(rows).items()
    ]
    print(format_summary(summarize(runs)))
    return EXIT_OK


def _bench_compare(args) -> int:
    from .bench.report import read_csv
    from .bench.stats import mwu

    def pooled_ms(path):
        rows = read_csv(path)
        if not rows:
            raise EdgeFaasError(f"{path} has no records")
        return [float(r["rtt_ms"]) for r in rows]

    result = mwu(pooled_ms(args.csv_a), pooled_ms(args.csv_b))
    print(f"U={result.u} p_two_sided={result.p_two_sided:.6g} method={result.method}")
    return EXIT_OK


def _plot(args) -> int:
    from .bench.report import LabeledRun, read_csv, write_boxplot

    rows = read_csv(args.csv)
    if not rows:
        raise EdgeFaasError("CSV has no records")
    runs = [
        LabeledRun(fn, impl, [phases[i] for i in sorted(phases)])
        for (fn, impl), phases in _group_csv_rows(rows).items()
    ]
    path = write_boxplot(runs, args.out)
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
