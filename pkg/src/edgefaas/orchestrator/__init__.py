"""Edge-side lifecycle manager for lambda function hosts."""

from .main import HostStatusListener, Orchestrator
from .relay import AUTH_REJECTED_EXIT_CODE, RegistryLink
from .supervisor import BackoffPolicy, ManagedProcess, ProcessState, Supervisor
from .sync import SyncPlan, sync_plan

__all__ = [
    "AUTH_REJECTED_EXIT_CODE",
    "BackoffPolicy",
    "HostStatusListener",
    "ManagedProcess",
    "Orchestrator",
    "ProcessState",
    "RegistryLink",
    "Supervisor",
    "SyncPlan",
    "sync_plan",
]
