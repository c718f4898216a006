"""Process-wide monotonic nanosecond clock.

All timestamps in the framework (envelope source/publish times, trigger
decision times, RTT endpoints) come from this single monotonic clock so that
differences between any two of them are meaningful.
"""

import time


def now_ns() -> int:
    """Current monotonic time in nanoseconds."""
    return time.monotonic_ns()


def ns_to_ms(ns: int) -> float:
    return ns / 1e6


def s_to_ns(seconds: float) -> int:
    return int(seconds * 1e9)
