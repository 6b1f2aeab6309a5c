"""Wire-protocol environment service (RVNP1).

One JSON object per LF-terminated line, one response per request.  Each
connection owns one session: an independent cursor over the scenario list and
at most one live episode.  Identical request streams against the same
scenario file produce identical response streams.

    -> {"id":1,"cmd":"hello"}
    <- {"id":1,"ok":true,"version":"RVNP1","n_rays":64,"C":5}
    -> {"id":2,"cmd":"reset"}                      # or {"episode": index}
    <- {"id":2,"ok":true,"obs":[...],"goal":[x,y],"scene_id":"scene_..."}
    -> {"id":3,"cmd":"step","action":"MOVE_FORWARD"}
    <- {"id":3,"ok":true,"obs":[...],"goal":[x,y],"reward":r,"cost":c,
        "done":false,"info":{"collided":false,"goal_reached":false,
        "dtg":d,"status":"RUNNING"}}
    <- {"id":n,"ok":false,"error":"bad_request","message":"..."}   # errors

Error codes: ``bad_request`` (malformed JSON or arguments), ``unknown_cmd``,
``no_episode`` (step before reset / after done).  The environment variable
``RVN_SEED`` overrides every scenario episode seed for ad-hoc runs.

The same session logic also runs over stdio for subprocess embedding.
"""

from __future__ import annotations

import itertools
import json
import os
import socket
import socketserver
import sys
import threading
from dataclasses import replace
from typing import IO, Optional, Sequence

from .episode import Episode
from .evalharness import SceneCache, ScenarioSet
from .kinematics import ACTIONS
from .sensing import ObservationFrame

PROTOCOL_VERSION = "RVNP1"


def _obs_payload(obs: ObservationFrame) -> tuple[list[float], list[float]]:
    return [float(d) for d in obs.depths], [float(g) for g in obs.goal_ego]


_session_counter = itertools.count(1)


class Session:
    """Protocol state machine for one connection; transport-agnostic.

    Session ids are unique per process; the cursor walks the scenario list
    independently of every other session.
    """

    def __init__(self, scenarios: ScenarioSet, cache: SceneCache):
        self.session_id = f"session-{next(_session_counter)}"
        self.version = PROTOCOL_VERSION
        self.scenarios = scenarios
        self.cache = cache
        self.cursor = 0
        self.episode: Optional[Episode] = None
        self.live = False

    def handle_line(self, line: str) -> str:
        req_id = None
        try:
            try:
                req = json.loads(line)
            except json.JSONDecodeError:
                return self._error(None, "bad_request", "malformed JSON")
            if not isinstance(req, dict):
                return self._error(None, "bad_request", "request must be an object")
            req_id = req.get("id")
            cmd = req.get("cmd")
            if cmd is None:
                return self._error(req_id, "bad_request", "missing cmd")
            if cmd == "hello":
                return self._hello(req_id)
            if cmd == "reset":
                return self._reset(req_id, req)
            if cmd == "step":
                return self._step(req_id, req)
            return self._error(req_id, "unknown_cmd", f"unknown cmd {cmd!r}")
        except Exception as exc:  # never crash the server on one request
            return self._error(req_id, "internal", f"{type(exc).__name__}: {exc}")

    def _hello(self, req_id) -> str:
        return self._ok(req_id, version=PROTOCOL_VERSION,
                        n_rays=self.scenarios.sensor_spec.n_rays,
                        C=self.scenarios.sensor_spec.history)

    def _reset(self, req_id, req: dict) -> str:
        episodes = self.scenarios.episodes
        if not episodes:
            return self._error(req_id, "bad_request", "scenario set is empty")
        index = req.get("episode")
        if index is None:
            index = self.cursor
            self.cursor = (self.cursor + 1) % len(episodes)
        elif not isinstance(index, int) or not (0 <= index < len(episodes)):
            return self._error(req_id, "bad_request",
                               f"episode index out of range [0, {len(episodes)})")
        spec = episodes[index]
        seed = spec.episode_seed
        override = os.environ.get("RVN_SEED")
        if override is not None:
            seed = int(override)
        grid, nav = self.cache.get(spec.scene_seed)
        config = replace(self.scenarios.episode_config, seed=seed)
        self.episode = Episode(grid, config, self.scenarios.agent_spec,
                               self.scenarios.sensor_spec, nav=nav)
        _, obs = self.episode.reset()
        self.live = True
        depths, goal = _obs_payload(obs)
        return self._ok(req_id, obs=depths, goal=goal, scene_id=spec.scene_id)

    def _step(self, req_id, req: dict) -> str:
        if self.episode is None or not self.live:
            return self._error(req_id, "no_episode",
                               "no live episode; send reset first")
        action = req.get("action")
        if action not in ACTIONS:
            return self._error(req_id, "bad_request", f"invalid action {action!r}")
        result = self.episode.step(action)
        if result.done:
            self.live = False
        depths, goal = _obs_payload(result.observation)
        return self._ok(req_id, obs=depths, goal=goal, reward=result.reward,
                        cost=result.cost, done=result.done, info=result.info)

    @staticmethod
    def _ok(req_id, **payload) -> str:
        return json.dumps({"id": req_id, "ok": True, **payload})

    @staticmethod
    def _error(req_id, code: str, message: str) -> str:
        return json.dumps({"id": req_id, "ok": False, "error": code,
                           "message": message})


class EnvServer(socketserver.ThreadingTCPServer):
    """One session per connection; scenes shared read-only across sessions."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, bind: tuple[str, int], scenarios: ScenarioSet,
                 transcript: Optional[IO[str]] = None):
        self.scenarios = scenarios
        self.cache = SceneCache(scenarios.scene_params, scenarios.agent_spec)
        self.transcript = transcript
        self._transcript_lock = threading.Lock()
        super().__init__(bind, _Handler)

    def log_response(self, line: str) -> None:
        if self.transcript is None:
            return
        with self._transcript_lock:
            self.transcript.write(line + "\n")
            self.transcript.flush()

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: EnvServer = self.server
        session = Session(server.scenarios, server.cache)
        while True:
            raw = self.rfile.readline()
            if not raw:
                return
            line = raw.decode("utf-8", errors="replace").rstrip("\r\n")
            response = session.handle_line(line)
            server.log_response(response)
            try:
                self.wfile.write(response.encode("utf-8") + b"\n")
            except (BrokenPipeError, ConnectionResetError):
                return


def parse_bind(bind: str) -> tuple[str, int]:
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind address must be host:port, got {bind!r}")
    return host, int(port)


def start_server(bind: str, scenarios: ScenarioSet,
                 transcript: Optional[IO[str]] = None) -> EnvServer:
    """Bind and serve in a daemon thread; returns the live server."""
    server = EnvServer(parse_bind(bind), scenarios, transcript=transcript)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def serve(bind: str, scenarios: ScenarioSet,
          transcript: Optional[IO[str]] = None) -> None:
    """Blocking variant of :func:`start_server`."""
    with EnvServer(parse_bind(bind), scenarios, transcript=transcript) as server:
        server.serve_forever()


def serve_stdio(scenarios: ScenarioSet, stdin: IO[str] = sys.stdin,
                stdout: IO[str] = sys.stdout) -> None:
    """Run one session over stdio for subprocess embedding."""
    cache = SceneCache(scenarios.scene_params, scenarios.agent_spec)
    session = Session(scenarios, cache)
    for line in stdin:
        stdout.write(session.handle_line(line.rstrip("\r\n")) + "\n")
        stdout.flush()


class PolicyClientAgent:
    """Eval-side adapter that queries an external policy over a socket.

    The policy speaks a one-line-per-exchange JSON protocol:

        -> {"cmd":"begin_episode","scene_id":...}   <- {"ok":true}
        -> {"cmd":"act","obs":[...],"goal":[x,y]}   <- {"action":"MOVE_FORWARD"}
    """

    def __init__(self, address: str):
        host, port = parse_bind(address)
        self._sock = socket.create_connection((host, port))
        self._file = self._sock.makefile("rw", encoding="utf-8", newline="\n")
        self._scene_id = None

    def _exchange(self, payload: dict) -> dict:
        self._file.write(json.dumps(payload) + "\n")
        self._file.flush()
        line = self._file.readline()
        if not line:
            raise ConnectionError("policy server closed the connection")
        return json.loads(line)

    def begin_episode(self, episode) -> None:
        self._scene_id = episode.scene.scene_id
        self._exchange({"cmd": "begin_episode", "scene_id": self._scene_id})

    def act(self, obs: ObservationFrame,
            history: Sequence[ObservationFrame]) -> str:
        depths, goal = _obs_payload(obs)
        reply = self._exchange({"cmd": "act", "obs": depths, "goal": goal})
        return reply.get("action", "")

    def close(self) -> None:
        self._file.close()
        self._sock.close()
