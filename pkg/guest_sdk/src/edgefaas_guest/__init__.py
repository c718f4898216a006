"""Authoring SDK and in-process bridge for scripted edgefaas lambda functions.

A guest package is a directory (or zip archive) with an entry script defining
``setup(params)`` and ``on_invoke(ctx)``; see the README authoring guide.
Hosts reference packages through the manifest entry
``{"kind": "guest", "ref": "<path>"}`` and load them via
``edgefaas_guest.bridge.load_guest``.
"""

from .bridge import GuestBridge, GuestError, InvocationResult, bridge_invoke, load_guest
from .context import FrameView, GuestContext, GuestRecord
from .package import SDK_VERSION, GuestPackage, GuestPackageError, resolve_package
from .parity import ParityReport, guest_parity_suite
from .records import decode_imu

__version__ = "0.1.0"

__all__ = [
    "FrameView",
    "GuestBridge",
    "GuestContext",
    "GuestError",
    "GuestPackage",
    "GuestPackageError",
    "GuestRecord",
    "InvocationResult",
    "ParityReport",
    "SDK_VERSION",
    "bridge_invoke",
    "decode_imu",
    "guest_parity_suite",
    "load_guest",
    "resolve_package",
    "__version__",
]
