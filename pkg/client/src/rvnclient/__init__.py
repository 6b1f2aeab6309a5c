"""Thin Python client for the RVNP1 navigation environment protocol."""

from .env import PROTOCOL_VERSION, RemoteEnv, connect
from .errors import (
    BadRequestError,
    ConnectError,
    NoEpisodeError,
    ProtocolError,
    RvnClientError,
    ServerError,
    UnknownCommandError,
    VersionMismatchError,
)

__version__ = "0.1.0"
