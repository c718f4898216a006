"""Desired-state reconciliation: exact set difference plus change detection."""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..registry.store import DesiredState


@dataclass(frozen=True)
class SyncPlan:
    spawn: frozenset[str]
    stop: frozenset[str]
    keep: frozenset[str]
    restart_changed: frozenset[str]

    @property
    def empty(self) -> bool:
        return not (self.spawn or self.stop or self.restart_changed)


def _identity(manifest_doc: dict, checksum: str) -> str:
    return json.dumps({"manifest": manifest_doc, "checksum": checksum}, sort_keys=True)


def sync_plan(current: dict[str, tuple[dict, str]], desired: DesiredState) -> SyncPlan:
    """current: name -> (manifest document, package checksum)."""
    desired_map = {f.manifest["name"]: (f.manifest, f.checksum) for f in desired.functions}
    current_names = set(current)
    desired_names = set(desired_map)
    spawn = desired_names - current_names
    stop = current_names - desired_names
    keep, changed = set(), set()
    for name in current_names & desired_names:
        if _identity(*current[name]) == _identity(*desired_map[name]):
            keep.add(name)
        else:
            changed.add(name)
    return SyncPlan(frozenset(spawn), frozenset(stop), frozenset(keep), frozenset(changed))
