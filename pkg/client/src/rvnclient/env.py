"""RemoteEnv: a reset/step interface over an RVNP1 socket.

The client stays protocol-thin: it decodes server payloads field for field
and adds only local episode-liveness guards.  Optionally it records every raw
response line plus the decoded (reward, cost, done) stream so transcripts can
be checked against the server's own log.
"""

from __future__ import annotations

import json
import socket
from typing import Optional

import numpy as np

from .errors import (
    ConnectError,
    NoEpisodeError,
    ProtocolError,
    VersionMismatchError,
    error_for,
)

PROTOCOL_VERSION = "RVNP1"


def _parse_address(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ConnectError(f"address must be host:port, got {address!r}")
    return host, int(port)


class RemoteEnv:
    """One connection, one episode at a time.

    Use :meth:`connect` rather than the constructor; the handshake caches the
    server's protocol version, ray count, and history length.
    """

    def __init__(self, sock: socket.socket, record: bool = False):
        self._sock = sock
        self._file = sock.makefile("rw", encoding="utf-8", newline="\n")
        self._next_id = 0
        self._live = False
        self.version: Optional[str] = None
        self.n_rays: Optional[int] = None
        self.history_len: Optional[int] = None
        self.scene_id: Optional[str] = None
        self.last_goal: Optional[tuple[float, float]] = None
        self.record = record
        self.raw_log: list[str] = []
        self.decoded_log: list[tuple[float, float, bool]] = []

    # -- lifecycle ----------------------------------------------------------

    @classmethod
    def connect(cls, address: str, timeout: float = 10.0,
                record: bool = False) -> "RemoteEnv":
        host, port = _parse_address(address)
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ConnectError(f"cannot connect to {address}: {exc}") from exc
        env = cls(sock, record=record)
        hello = env._request({"cmd": "hello"})
        if hello.get("version") != PROTOCOL_VERSION:
            env.close()
            raise VersionMismatchError(
                f"server speaks {hello.get('version')!r}, need {PROTOCOL_VERSION!r}")
        env.version = hello["version"]
        env.n_rays = int(hello["n_rays"])
        env.history_len = int(hello["C"])
        return env

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "RemoteEnv":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- episode API ----------------------------------------------------------

    def reset(self, episode: Optional[int] = None) -> tuple[np.ndarray, tuple[float, float]]:
        """Start an episode; returns (depths, egocentric goal)."""
        payload = {"cmd": "reset"}
        if episode is not None:
            payload["episode"] = episode
        reply = self._request(payload)
        self._live = True
        self.scene_id = reply["scene_id"]
        self.last_goal = tuple(reply["goal"])
        return self._decode_obs(reply), self.last_goal

    def step(self, action: str):
        """Apply one action; returns (depths, reward, cost, done, info).

        Refused locally (no network round-trip) when no episode is live.
        """
        if not self._live:
            raise NoEpisodeError("no live episode; call reset() first")
        reply = self._request({"cmd": "step", "action": action})
        reward = float(reply["reward"])
        cost = float(reply["cost"])
        done = bool(reply["done"])
        if self.record:
            self.decoded_log.append((reward, cost, done))
        if done:
            self._live = False
        self.last_goal = tuple(reply["goal"])
        return self._decode_obs(reply), reward, cost, done, reply["info"]

    # -- wire helpers ---------------------------------------------------------

    def _request(self, payload: dict) -> dict:
        self._next_id += 1
        payload = {"id": self._next_id, **payload}
        try:
            self._file.write(json.dumps(payload) + "\n")
            self._file.flush()
            line = self._file.readline()
        except OSError as exc:
            raise ProtocolError(f"transport failed: {exc}") from exc
        if not line:
            raise ProtocolError("server closed the connection")
        if self.record:
            self.raw_log.append(line.rstrip("\n"))
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable response: {line!r}") from exc
        if reply.get("id") != self._next_id:
            raise ProtocolError(
                f"response id {reply.get('id')} does not match request {self._next_id}")
        if not reply.get("ok"):
            raise error_for(reply.get("error", "unknown"), reply.get("message", ""))
        return reply

    def _decode_obs(self, reply: dict) -> np.ndarray:
        obs = np.asarray(reply["obs"], dtype=np.float64)
        if self.n_rays is not None and len(obs) != self.n_rays:
            raise ProtocolError(f"expected {self.n_rays} rays, got {len(obs)}")
        return obs


def connect(address: str, timeout: float = 10.0, record: bool = False) -> RemoteEnv:
    """Module-level alias for :meth:`RemoteEnv.connect`."""
    return RemoteEnv.connect(address, timeout=timeout, record=record)
