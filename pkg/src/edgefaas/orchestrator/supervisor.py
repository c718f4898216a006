"""Process supervision: spawn one host per function, restart with backoff.

Restart schedule: first restart after ``initial_s``, doubling per consecutive
restart up to ``cap_s``. After ``max_restarts`` restarts within ``window_s``
the process is marked failed_permanent and left down. Graceful stop sends the
termination signal, waits out the grace period, then kills.

The supervision loop is the only thread that spawns or reaps processes, so
there is never more than one live process per function name.
"""

from __future__ import annotations

import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional


@dataclass(frozen=True)
class BackoffPolicy:
    initial_s: float = 0.5
    factor: float = 2.0
    cap_s: float = 30.0
    max_restarts: int = 10
    window_s: float = 3600.0

    def delay(self, restart_index: int) -> float:
        """Delay before restart number restart_index+1 (0-based index)."""
        return min(self.initial_s * self.factor**restart_index, self.cap_s)


class ProcessState(str, Enum):
    SPAWNING = "spawning"
    UP = "up"
    BACKING_OFF = "backing_off"
    STOPPED = "stopped"
    FAILED_PERMANENT = "failed_permanent"


@dataclass
class ManagedProcess:
    name: str
    manifest_doc: dict
    checksum: str
    state: ProcessState = ProcessState.SPAWNING
    proc: Optional[subprocess.Popen] = None
    restart_count: int = 0
    restart_at: float = 0.0
    restart_times: deque = field(default_factory=deque)
    last_exit_code: Optional[int] = None


CommandFactory = Callable[[str, dict], list]


class Supervisor:
    def __init__(
        self,
        command_factory: CommandFactory,
        policy: BackoffPolicy = BackoffPolicy(),
        stop_grace_s: float = 5.0,
        poll_interval_s: float = 0.02,
    ):
        self._command_factory = command_factory
        self.policy = policy
        self.stop_grace_s = stop_grace_s
        self._poll_interval = poll_interval_s
        self._managed: dict[str, ManagedProcess] = {}
        self._lock = threading.RLock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, name="supervisor", daemon=True)
        self._thread.start()

    # -- desired-set application ------------------------------------------------

    def apply(self, desired: dict[str, tuple[dict, str]]) -> None:
        """Make the managed set equal to desired {name: (manifest, checksum)}."""
        with self._lock:
            for name in list(self._managed):
                if name not in desired:
                    self._stop_one(self._managed.pop(name))
            for name, (manifest_doc, checksum) in desired.items():
                existing = self._managed.get(name)
                if existing is not None:
                    same = (
                        existing.manifest_doc == manifest_doc
                        and existing.checksum == checksum
                        and existing.state in (ProcessState.UP, ProcessState.SPAWNING, ProcessState.BACKING_OFF)
                    )
                    if same:
                        continue
                    self._stop_one(self._managed.pop(name))
                mp = ManagedProcess(name, manifest_doc, checksum)
                self._managed[name] = mp
                self._spawn(mp)

    def stop_all(self) -> None:
        with self._lock:
            for name in list(self._managed):
                self._stop_one(self._managed.pop(name))

    def close(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5)
        self.stop_all()

    # -- inspection ----------------------------------------------------------------

    def states(self) -> dict[str, ProcessState]:
        with self._lock:
            return {name: mp.state for name, mp in self._managed.items()}

    def up_set(self) -> set[str]:
        with self._lock:
            return {
                name
                for name, mp in self._managed.items()
                if mp.state == ProcessState.UP and mp.proc is not None and mp.proc.poll() is None
            }

    def process(self, name: str) -> Optional[ManagedProcess]:
        with self._lock:
            return self._managed.get(name)

    # -- internals --------------------------------------------------------------------

    def _spawn(self, mp: ManagedProcess) -> None:
        try:
            argv = self._command_factory(mp.name, mp.manifest_doc)
            mp.proc = subprocess.Popen(argv)
            mp.state = ProcessState.UP
        except OSError:
            mp.proc = None
            mp.last_exit_code = None
            self._schedule_restart(mp)

    def _schedule_restart(self, mp: ManagedProcess) -> None:
        now = time.monotonic()
        while mp.restart_times and now - mp.restart_times[0] > self.policy.window_s:
            mp.restart_times.popleft()
        if len(mp.restart_times) >= self.policy.max_restarts:
            mp.state = ProcessState.FAILED_PERMANENT
            return
        delay = self.policy.delay(len(mp.restart_times))
        mp.restart_times.append(now)
        mp.restart_count += 1
        mp.restart_at = now + delay
        mp.state = ProcessState.BACKING_OFF

    def _stop_one(self, mp: ManagedProcess) -> None:
        if mp.proc is not None and mp.proc.poll() is None:
            mp.proc.terminate()
            try:
                mp.proc.wait(timeout=self.stop_grace_s)
            except subprocess.TimeoutExpired:
                mp.proc.kill()
                mp.proc.wait()
        mp.state = ProcessState.STOPPED

    def _loop(self) -> None:
        while not self._stop.is_set():
            with self._lock:
                for mp in self._managed.values():
                    if mp.state == ProcessState.UP:
                        code = mp.proc.poll() if mp.proc is not None else None
                        if code is not None:
                            mp.last_exit_code = code
                            self._schedule_restart(mp)
                    elif mp.state == ProcessState.BACKING_OFF:
                        if time.monotonic() >= mp.restart_at:
                            self._spawn(mp)
            self._stop.wait(self._poll_interval)
