"""Typed client-side errors mirroring the RVNP1 error codes."""


class RvnClientError(Exception):
    """Base class for all client errors."""


class ConnectError(RvnClientError):
    """Could not reach or handshake with the environment server."""


class VersionMismatchError(ConnectError):
    """Server speaks a protocol version this client does not."""


class ProtocolError(RvnClientError):
    """Transport-level breakage: closed stream or unparseable response."""


class ServerError(RvnClientError):
    """Server replied ok=false; carries the error code and message."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class BadRequestError(ServerError):
    pass


class UnknownCommandError(ServerError):
    pass


class NoEpisodeError(RvnClientError):
    """step() without a live episode (raised locally, before any network IO,
    and also mapped from the server's no_episode code)."""


_CODE_MAP = {
    "bad_request": BadRequestError,
    "unknown_cmd": UnknownCommandError,
}


def error_for(code: str, message: str) -> RvnClientError:
    if code == "no_episode":
        return NoEpisodeError(f"{code}: {message}")
    return _CODE_MAP.get(code, ServerError)(code, message)
