"""End-to-end benchmark loop: hosts + looped replay + measurement + report."""

from __future__ import annotations

import threading
from pathlib import Path

from ..host import FunctionHost
from ..manifest import FunctionManifest
from ..transport import Transport
from .bag import ReplayBag
from .measure import PhasePlan, measure
from .replay import replay
from .report import LabeledRun, format_summary, summarize, write_boxplot, write_csv


def run_benchmark(
    bag_path: str | Path,
    manifest_paths: list[str],
    plan: PhasePlan,
    speed: float = 1.0,
    implementation: str = "lambda",
    out_dir: str | Path = ".",
) -> dict:
    """Run the full loop against in-process hosts; writes CSV, summary, plot."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bag = ReplayBag.load(bag_path)
    transport = Transport()
    hosts = []
    stop = threading.Event()
    try:
        for path in manifest_paths:
            manifest = FunctionManifest.load(path)
            hosts.append(FunctionHost(manifest, transport, instrument_rtt=True).load().start())
        replayer = threading.Thread(
            target=replay,
            args=(bag, transport),
            kwargs={"speed": speed, "realign": True, "loop": True, "stop": stop},
            daemon=True,
        )
        replayer.start()
        phases = measure(transport, plan)
    finally:
        stop.set()
        for host in hosts:
            host.stop()
        transport.close()
    replayer.join(timeout=5)

    function_names = sorted({r.function for phase in phases for r in phase})
    runs = [
        LabeledRun(
            name,
            implementation,
            [[r for r in phase if r.function == name] for phase in phases],
        )
        for name in function_names
    ]
    if not runs:
        raise RuntimeError("no RTT records were collected; did the functions trigger?")
    csv_path = write_csv(runs, out_dir / "rtt.csv")
    summary_rows = summarize(runs)
    summary_text = format_summary(summary_rows)
    (out_dir / "summary.txt").write_text(summary_text + "\n", encoding="utf-8")
    plot_path = write_boxplot(runs, out_dir / "rtt_boxplot.png")
    return {
        "csv": str(csv_path),
        "plot": str(plot_path),
        "summary": summary_rows,
        "summary_text": summary_text,
        "per_phase_counts": [len(p) for p in phases],
    }
