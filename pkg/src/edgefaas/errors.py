"""Exception hierarchy shared across the framework."""


class EdgeFaasError(Exception):
    """Base class for all framework errors."""


class TransportError(EdgeFaasError):
    pass


class TransportClosed(TransportError):
    """Raised by publish/subscribe after the transport shut down."""


class PayloadTooLarge(TransportError):
    pass


class IngressError(EdgeFaasError):
    pass


class DuplicateTopic(IngressError):
    pass


class UnknownTopic(IngressError):
    pass


class WrongChannelClass(IngressError):
    """Raised when a windowed read is attempted on a frame channel."""


class NoTriggerTopic(IngressError):
    pass


class ManifestError(EdgeFaasError):
    pass


class HostError(EdgeFaasError):
    pass


class UnknownBuiltin(HostError):
    pass


class GuestLoadFailure(HostError):
    pass


class CalledOutsideInvocation(HostError):
    """Context API used from outside an active invocation."""


class InferenceError(HostError):
    pass


class ModelNotFound(InferenceError):
    pass


class ShapeMismatch(InferenceError):
    pass


class BackendFailure(InferenceError):
    pass


class BagError(EdgeFaasError):
    pass


class MalformedBag(BagError):
    """Bag parse failure; ``offset`` is the first bad byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class RegistryError(EdgeFaasError):
    pass


class AuthFailed(RegistryError):
    pass


class ChecksumMismatch(RegistryError):
    pass


class VersionConflict(RegistryError):
    pass


class UnknownPackage(RegistryError):
    pass


class UnknownVehicle(RegistryError):
    pass
