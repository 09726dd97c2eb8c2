from .transport import (
    ALLOWED_TAGS,
    CommStats,
    Endpoint,
    ProtocolError,
    Tag,
    TransportError,
    in_proc_pair,
    tcp_connect,
    tcp_listen,
    virtual_seconds,
)
from .twoparty import (
    MagnitudeBoundError,
    ProtocolParams,
    sshef_decryptor,
    sshef_holder,
    ssmm_dense_side,
    ssmm_sparse_side,
)

__all__ = [
    "ALLOWED_TAGS",
    "CommStats",
    "Endpoint",
    "MagnitudeBoundError",
    "ProtocolError",
    "ProtocolParams",
    "Tag",
    "TransportError",
    "in_proc_pair",
    "sshef_decryptor",
    "sshef_holder",
    "ssmm_dense_side",
    "ssmm_sparse_side",
    "tcp_connect",
    "tcp_listen",
    "virtual_seconds",
]
