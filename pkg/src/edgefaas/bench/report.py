"""Benchmark outputs: CSV, per-function summary table, log-scale box plot.

CSV columns: function,implementation,phase,t_in_ns,t_out_ns,rtt_ms.
The summary aggregates per (function, implementation), per phase and pooled,
in min/max/mean/MAD/95th layout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from ..payloads import RttRecord
from .stats import StatsSummary, stats

CSV_HEADER = ["function", "implementation", "phase", "t_in_ns", "t_out_ns", "rtt_ms"]


@dataclass(frozen=True)
class LabeledRun:
    function: str
    implementation: str
    phases: list[list[RttRecord]]


def write_csv(runs: list[LabeledRun], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for run in runs:
            for phase_index, phase in enumerate(run.phases):
                for r in phase:
                    writer.writerow(
                        [
                            run.function,
                            run.implementation,
                            phase_index,
                            r.t_in,
                            r.t_out,
                            f"{r.rtt_ms:.6f}",
                        ]
                    )
    return path


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def summarize(runs: list[LabeledRun]) -> list[dict]:
    """Per (function, implementation): per-phase and pooled statistics."""
    rows = []
    for run in runs:
        pooled: list[float] = []
        for phase_index, phase in enumerate(run.phases):
            samples = [r.rtt_ms for r in phase]
            pooled.extend(samples)
            if samples:
                rows.append(_row(run, f"phase{phase_index}", stats(samples)))
        if pooled:
            rows.append(_row(run, "pooled", stats(pooled)))
    return rows


def _row(run: LabeledRun, phase: str, summary: StatsSummary) -> dict:
    return {"function": run.function, "implementation": run.implementation, "phase": phase, **summary.row()}


def format_summary(rows: list[dict]) -> str:
    header = f"{'Function':<16} {'Impl':<10} {'Phase':<8} {'n':>6} {'Min':>9} {'Max':>9} {'Mean':>9} {'MAD':>9} {'95th':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['function']:<16} {r['implementation']:<10} {r['phase']:<8} {r['n']:>6} "
            f"{r['min_ms']:>9.2f} {r['max_ms']:>9.2f} {r['mean_ms']:>9.2f} {r['mad_ms']:>9.2f} {r['p95_ms']:>9.2f}"
        )
    return "\n".join(lines)


def write_boxplot(runs: list[LabeledRun], path: str | Path) -> Path:
    """Box plots of pooled RTTs per label on a logarithmic ms axis."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels, series = [], []
    for run in runs:
        samples = [r.rtt_ms for phase in run.phases for r in phase]
        if samples:
            labels.append(f"{run.function}\n{run.implementation}")
            series.append(samples)
    if not series:
        raise ValueError("no records to plot")
    fig, ax = plt.subplots(figsize=(max(4, 2 * len(series)), 4))
    ax.boxplot(series, tick_labels=labels)
    ax.set_yscale("log")
    ax.set_ylabel("RTT [ms]")
    ax.grid(True, axis="y", alpha=0.4)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
