"""Cloud-side registry: package repository, deployments, log sink."""

from .client import OperatorClient
from .server import RegistryServer, TokenFile, hash_token
from .store import (
    DesiredFunction,
    DesiredState,
    PackageMeta,
    RegistryStore,
    native_ref_blob,
    sha256_hex,
)

__all__ = [
    "DesiredFunction",
    "DesiredState",
    "OperatorClient",
    "PackageMeta",
    "RegistryServer",
    "RegistryStore",
    "TokenFile",
    "hash_token",
    "native_ref_blob",
    "sha256_hex",
]
