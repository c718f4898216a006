"""Built-in lambda functions and their registry.

Builtin ids: "imu_fft", "brake_dark", "detector", plus the benchmark helpers
"echo" (re-emits a mark action per trigger, optional sleep_ms param) and
"noop" (does nothing; useful for supervision tests).
"""

from __future__ import annotations

import time

from ..payloads import ActionKind
from .brake_dark import BrakeDarkLambda
from .detector import DetectorLambda
from .dsp import RoughnessConfig, fft, hann_window, roughness_score
from .imu_fft import ImuFftLambda


class EchoLambda:
    """Trigger echo for RTT self-benchmarks: one mark action per invocation."""

    def setup(self, params: dict) -> None:
        self.sleep_s = float(params.get("sleep_ms", 0)) / 1000.0

    def on_invoke(self, ctx) -> None:
        if self.sleep_s > 0:
            time.sleep(self.sleep_s)
        ctx.trigger(ActionKind.MARK, label="echo")


class NoopLambda:
    def setup(self, params: dict) -> None:
        pass

    def on_invoke(self, ctx) -> None:
        pass


BUILTINS = {
    "imu_fft": ImuFftLambda,
    "brake_dark": BrakeDarkLambda,
    "detector": DetectorLambda,
    "echo": EchoLambda,
    "noop": NoopLambda,
}

__all__ = [
    "BUILTINS",
    "BrakeDarkLambda",
    "DetectorLambda",
    "EchoLambda",
    "ImuFftLambda",
    "NoopLambda",
    "RoughnessConfig",
    "fft",
    "hann_window",
    "roughness_score",
]
