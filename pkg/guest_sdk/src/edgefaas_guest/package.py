"""Guest package resolution: a directory or zip archive with one entry script.

A package contains:

    guest.json      optional: {"entry": "function.py", "sdk_version": 1}
    function.py     the entry script (default name), defining
                        setup(params: dict) -> None
                        on_invoke(ctx) -> None

Zip archives hold the same files and are unpacked next to themselves on
first load (content is assumed immutable; the staging path is
content-addressed upstream).
"""

from __future__ import annotations

import importlib.util
import json
import sys
import zipfile
from dataclasses import dataclass
from pathlib import Path
from types import ModuleType

SDK_VERSION = 1
DEFAULT_ENTRY = "function.py"


class GuestPackageError(Exception):
    pass


@dataclass(frozen=True)
class GuestPackage:
    root: Path
    entry_script: Path
    sdk_version: int


def _unpack_archive(path: Path) -> Path:
    target = path.with_name(path.name + ".unpacked")
    if not target.exists():
        with zipfile.ZipFile(path) as archive:
            archive.extractall(target)
    return target


def resolve_package(ref: str | Path) -> GuestPackage:
    path = Path(ref)
    if not path.exists():
        raise GuestPackageError(f"guest package {str(path)!r} does not exist")
    if path.is_file():
        if not zipfile.is_zipfile(path):
            raise GuestPackageError(f"{str(path)!r} is neither a directory nor a zip archive")
        path = _unpack_archive(path)
    meta = {}
    meta_path = path / "guest.json"
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise GuestPackageError(f"guest.json is not valid JSON: {exc}") from exc
    entry = path / meta.get("entry", DEFAULT_ENTRY)
    if not entry.exists():
        raise GuestPackageError(f"entry script {str(entry)!r} not found")
    version = int(meta.get("sdk_version", SDK_VERSION))
    if version > SDK_VERSION:
        raise GuestPackageError(f"package needs sdk_version {version}, runtime has {SDK_VERSION}")
    return GuestPackage(path, entry, version)


_load_counter = 0


def load_module(package: GuestPackage) -> ModuleType:
    """Execute the entry script in its own module namespace."""
    global _load_counter
    _load_counter += 1
    name = f"_edgefaas_guest_fn_{_load_counter}"
    spec = importlib.util.spec_from_file_location(name, package.entry_script)
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    try:
        spec.loader.exec_module(module)
    except Exception:
        sys.modules.pop(name, None)
        raise
    for handler in ("setup", "on_invoke"):
        if not callable(getattr(module, handler, None)):
            sys.modules.pop(name, None)
            raise GuestPackageError(f"entry script must define a callable {handler}()")
    return module
