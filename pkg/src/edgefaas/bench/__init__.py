"""Benchmark subsystem: bag replay, RTT capture, statistics, reporting."""

from .bag import BagRecord, BagTopic, BagWriter, ReplayBag
from .convert import convert_interchange
from .measure import PhasePlan, measure, pooled
from .replay import ReplayReport, replay
from .report import LabeledRun, format_summary, summarize, write_boxplot, write_csv
from .runner import run_benchmark
from .stats import MwuResult, StatsSummary, mwu, stats
from .synth import BoxSpec, CameraSegment, ImuSegment, SynthSpec, synth_bag

__all__ = [
    "BagRecord",
    "BagTopic",
    "BagWriter",
    "BoxSpec",
    "CameraSegment",
    "convert_interchange",
    "ImuSegment",
    "LabeledRun",
    "MwuResult",
    "PhasePlan",
    "ReplayBag",
    "ReplayReport",
    "StatsSummary",
    "SynthSpec",
    "format_summary",
    "measure",
    "mwu",
    "pooled",
    "replay",
    "run_benchmark",
    "stats",
    "summarize",
    "synth_bag",
    "write_boxplot",
    "write_csv",
]
