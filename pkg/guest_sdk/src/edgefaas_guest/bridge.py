"""Host<->guest bridge: loads a guest package and runs it in-process.

The host looks this module up by name and calls ``load_guest(ref)``; the
returned bridge exposes the same ``setup``/``on_invoke`` surface as a native
function body, so the host's scheduling, failure accounting and lease
discipline apply unchanged. Guest code executes on the host's execution
thread (an embedded interpreter, not a separate OS process); a guest
exception becomes an error result, never a host crash.
"""

from __future__ import annotations

import traceback
from dataclasses import dataclass
from typing import Optional

from .context import GuestContext
from .package import GuestPackage, load_module, resolve_package


class GuestError(Exception):
    """Raised back into the host so its failure counter sees guest errors."""


@dataclass(frozen=True)
class InvocationResult:
    ok: bool
    error_message: Optional[str] = None
    error_traceback: Optional[str] = None


def bridge_invoke(bridge: "GuestBridge", host_ctx) -> InvocationResult:
    """Run one guest invocation; frame views die with it, even on error."""
    guest_ctx = GuestContext(host_ctx)
    try:
        bridge.module.on_invoke(guest_ctx)
        return InvocationResult(ok=True)
    except Exception as exc:
        return InvocationResult(
            ok=False,
            error_message=f"{type(exc).__name__}: {exc}",
            error_traceback=traceback.format_exc(),
        )
    finally:
        guest_ctx._close()


class GuestBridge:
    def __init__(self, package: GuestPackage):
        self.package = package
        self.module = load_module(package)
        self.last_result: Optional[InvocationResult] = None

    def setup(self, params: dict) -> None:
        self.module.setup(params)

    def on_invoke(self, host_ctx) -> None:
        result = bridge_invoke(self, host_ctx)
        self.last_result = result
        if not result.ok:
            raise GuestError(f"{result.error_message}\n{result.error_traceback}")


def load_guest(ref: str) -> GuestBridge:
    """Entry point the function host imports by module name."""
    return GuestBridge(resolve_package(ref))
