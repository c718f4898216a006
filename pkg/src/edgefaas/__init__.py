"""Edge-native FaaS framework for on-vehicle sensor-data filtering.

User-defined lambda functions subscribe to sensor topics, evaluate recording
conditions under a single-consumer execution model, and emit trigger actions
on "/lambda/actions". The bench subsystem measures the round-trip time from
data publication to recording decision.

Main entry points:
    - ``Transport`` / ``connect_transport``: the pub/sub data plane.
    - ``FunctionManifest`` + ``FunctionHost``: run one lambda function.
    - ``bench``: bag synthesis/replay, RTT measurement, statistics.
    - ``edgefaas`` CLI: registry, orchestrator, host, deploy, bag, bench.
"""

from .broker import BrokerServer, RemoteTransport, connect_transport
from .host import FunctionHost, HostStatus, InvocationContext
from .ingress import ChannelClass, IngressHub, RingBuffer, SignalRecord, SlotLease, SlotPool
from .manifest import EntrySpec, FunctionManifest, SubscriptionSpec
from .payloads import (
    ACTIONS_TOPIC,
    RTT_TOPIC,
    ActionKind,
    ImuSample,
    LogLevel,
    LogRecord,
    RttRecord,
    TriggerAction,
)
from .transport import ContentType, Envelope, QosProfile, Reliability, Subscription, Transport

__version__ = "0.1.0"

__all__ = [
    "ACTIONS_TOPIC",
    "ActionKind",
    "BrokerServer",
    "ChannelClass",
    "ContentType",
    "EntrySpec",
    "Envelope",
    "FunctionHost",
    "FunctionManifest",
    "HostStatus",
    "ImuSample",
    "IngressHub",
    "InvocationContext",
    "LogLevel",
    "LogRecord",
    "QosProfile",
    "RTT_TOPIC",
    "Reliability",
    "RemoteTransport",
    "RingBuffer",
    "RttRecord",
    "SignalRecord",
    "SlotLease",
    "SlotPool",
    "Subscription",
    "SubscriptionSpec",
    "Transport",
    "TriggerAction",
    "connect_transport",
    "__version__",
]
