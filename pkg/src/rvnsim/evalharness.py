"""Benchmark evaluation: scenario sets, episode batches, and metrics.

A scenario set is a deterministic list of (scene seed, episode seed) pairs
for one split (TRAIN builds 2 episodes per scene, VAL/TEST build 20) stored
as newline-delimited JSON with a ``RVNSCN1`` header.  ``run_eval`` executes
every episode against an agent and aggregates:

* ``sr1``            fraction of episodes that reach at least the first goal
* ``expected_goals`` mean goals reached per episode
* ``cpk``            collision terminations per kilometer of translation
                     (0 when nothing moved and nothing collided; infinite
                     when something collided without moving)

Reference agents: a privileged oracle that replans shortest paths to each
goal, and a sensor-only greedy policy used as a non-privileged baseline.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .datagen import PlannedPath, plan_path
from .episode import (
    FAIL_COLLISION,
    RUNNING,
    Episode,
    EpisodeConfig,
)
from .errors import ConfigurationError
from .kinematics import (
    ACTIONS,
    MOVE_FORWARD,
    STOP,
    TURN_LEFT,
    TURN_RIGHT,
    AgentSpec,
    Pose,
    execute_action,
    normalize_yaw,
)
from .sensing import ObservationFrame, ObservationHistory, SensorSpec
from .world import (
    InflatedGrid,
    OccupancyGrid,
    SceneParams,
    cell_center,
    generate_scene,
    inflate,
    point_to_cell,
)

TRAIN = "TRAIN"
VAL = "VAL"
TEST = "TEST"
EPISODES_PER_SCENE = {TRAIN: 2, VAL: 20, TEST: 20}

SCENARIO_FORMAT = "RVNSCN1"

# Row status for agents that emit an invalid action; regular episode statuses
# pass through unchanged.
FAIL_PROTOCOL = "FAIL_PROTOCOL"

CSV_HEADER = "scene_id,episode_seed,goals_reached,collided,distance_m,steps,status"


@dataclass(frozen=True)
class ScenarioEpisode:
    scene_id: str
    scene_seed: int
    episode_seed: int


@dataclass(frozen=True)
class ScenarioSet:
    split: str
    episodes_per_scene: int
    episodes: tuple[ScenarioEpisode, ...]
    episode_config: EpisodeConfig = EpisodeConfig()
    agent_spec: AgentSpec = AgentSpec()
    sensor_spec: SensorSpec = SensorSpec()
    scene_params: SceneParams = SceneParams()

    @property
    def scene_seeds(self) -> tuple[int, ...]:
        seen: dict[int, None] = {}
        for ep in self.episodes:
            seen.setdefault(ep.scene_seed)
        return tuple(seen)


def _episode_seed(scene_seed: int, index: int, split: str) -> int:
    salt = {TRAIN: 1, VAL: 2, TEST: 3}[split]
    seq = np.random.SeedSequence([int(scene_seed), int(index), salt])
    return int(seq.generate_state(1, np.uint64)[0] >> 1)  # keep it positive


def build_scenarios(scene_seeds: Sequence[int], split: str,
                    episode_config: EpisodeConfig = EpisodeConfig(),
                    agent_spec: AgentSpec = AgentSpec(),
                    sensor_spec: SensorSpec = SensorSpec(),
                    scene_params: SceneParams = SceneParams()) -> ScenarioSet:
    """Deterministic scenario set for one split."""
    if split not in EPISODES_PER_SCENE:
        raise ConfigurationError(f"unknown split {split!r}")
    if len(set(scene_seeds)) != len(scene_seeds):
        raise ConfigurationError("duplicate scene seeds within a split")
    per_scene = EPISODES_PER_SCENE[split]
    episodes = []
    for seed in scene_seeds:
        for k in range(per_scene):
            episodes.append(ScenarioEpisode(
                f"scene_{seed:08d}", int(seed), _episode_seed(seed, k, split)))
    seeds = [e.episode_seed for e in episodes]
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("episode seed collision; change scene seeds")
    return ScenarioSet(split, per_scene, tuple(episodes), episode_config,
                       agent_spec, sensor_spec, scene_params)


def build_benchmark(train_seeds: Sequence[int], val_seeds: Sequence[int],
                    test_seeds: Sequence[int], **kwargs) -> dict[str, ScenarioSet]:
    """All three splits at once; scene seeds must be disjoint across splits."""
    pools = {TRAIN: set(train_seeds), VAL: set(val_seeds), TEST: set(test_seeds)}
    for a in pools:
        for b in pools:
            if a < b and pools[a] & pools[b]:
                raise ConfigurationError(
                    f"scene seeds overlap between {a} and {b}: {sorted(pools[a] & pools[b])}")
    return {split: build_scenarios(sorted(pools[split]), split, **kwargs)
            for split in (TRAIN, VAL, TEST)}


# -- scenario file IO --------------------------------------------------------


def _dataclass_to_json(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _scenario_header(scn: ScenarioSet) -> dict:
    return {
        "format": SCENARIO_FORMAT,
        "split": scn.split,
        "episodes_per_scene": scn.episodes_per_scene,
        "config": {
            "episode": _dataclass_to_json(scn.episode_config),
            "agent": _dataclass_to_json(scn.agent_spec),
            "sensor": _dataclass_to_json(scn.sensor_spec),
            "scene": _dataclass_to_json(scn.scene_params),
        },
    }


def scenario_text(scn: ScenarioSet) -> str:
    lines = [json.dumps(_scenario_header(scn), sort_keys=True,
                        separators=(",", ":"))]
    for ep in scn.episodes:
        lines.append(json.dumps(
            {"scene_id": ep.scene_id, "scene_seed": ep.scene_seed,
             "episode_seed": ep.episode_seed},
            sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def save_scenarios(scn: ScenarioSet, path: Path | str) -> None:
    Path(path).write_bytes(scenario_text(scn).encode("utf-8"))


def _tupled(cls, data: dict):
    coerced = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        coerced[f.name] = tuple(v) if isinstance(v, list) else v
    return cls(**coerced)


def load_scenarios(path: Path | str) -> ScenarioSet:
    lines = Path(path).read_text("utf-8").splitlines()
    if not lines:
        raise ConfigurationError("empty scenario file")
    head = json.loads(lines[0])
    if head.get("format") != SCENARIO_FORMAT:
        raise ConfigurationError(f"not a {SCENARIO_FORMAT} file")
    cfg = head["config"]
    episodes = []
    for line in lines[1:]:
        if not line:
            continue
        row = json.loads(line)
        episodes.append(ScenarioEpisode(row["scene_id"], row["scene_seed"],
                                        row["episode_seed"]))
    return ScenarioSet(head["split"], head["episodes_per_scene"], tuple(episodes),
                       _tupled(EpisodeConfig, cfg["episode"]),
                       _tupled(AgentSpec, cfg["agent"]),
                       _tupled(SensorSpec, cfg["sensor"]),
                       _tupled(SceneParams, cfg["scene"]))


# -- scene cache -------------------------------------------------------------


class SceneCache:
    """Shared (scene, robot-inflation) store keyed by scene seed."""

    def __init__(self, params: SceneParams, agent: AgentSpec):
        self.params = params
        self.agent = agent
        self._lock = threading.Lock()
        self._scenes: dict[int, tuple[OccupancyGrid, InflatedGrid]] = {}

    def get(self, scene_seed: int) -> tuple[OccupancyGrid, InflatedGrid]:
        with self._lock:
            hit = self._scenes.get(scene_seed)
        if hit is not None:
            return hit
        grid = generate_scene(scene_seed, self.params)
        nav = inflate(grid, self.agent.r_robot)
        with self._lock:
            return self._scenes.setdefault(scene_seed, (grid, nav))


# -- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeRow:
    scene_id: str
    episode_seed: int
    goals_reached: int
    collided: bool
    distance_m: float
    steps: int
    status: str
    flag: Optional[str] = None  # e.g. "unreachable" or "protocol"

    def csv(self) -> str:
        return (f"{self.scene_id},{self.episode_seed},{self.goals_reached},"
                f"{int(self.collided)},{self.distance_m:.6f},{self.steps},"
                f"{self.status}")


def compute_metrics(rows: Sequence[EpisodeRow]) -> tuple[float, float, float]:
    """(sr1, expected_goals, cpk) from per-episode rows."""
    n = len(rows)
    if n == 0:
        return 0.0, 0.0, 0.0
    sr1 = sum(1 for r in rows if r.goals_reached >= 1) / n
    expected = sum(r.goals_reached for r in rows) / n
    collisions = sum(1 for r in rows if r.collided)
    distance = sum(r.distance_m for r in rows)
    if distance == 0.0:
        cpk = 0.0 if collisions == 0 else math.inf
    else:
        cpk = collisions / (distance / 1000.0)
    return sr1, expected, cpk


@dataclass(frozen=True)
class EvalReport:
    sr1: float
    expected_goals: float
    cpk: float
    rows: tuple[EpisodeRow, ...]

    def to_json(self) -> dict:
        return {
            "sr1": self.sr1,
            "expected_goals": self.expected_goals,
            "cpk": "inf" if math.isinf(self.cpk) else self.cpk,
            "episodes": len(self.rows),
            "rows": [
                {"scene_id": r.scene_id, "episode_seed": r.episode_seed,
                 "goals_reached": r.goals_reached, "collided": r.collided,
                 "distance_m": r.distance_m, "steps": r.steps,
                 "status": r.status, "flag": r.flag}
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv() for r in self.rows]) + "\n"


# -- agents ------------------------------------------------------------------


class NavAgent(Protocol):
    """Action provider interface used by run_eval."""

    def begin_episode(self, episode: Episode) -> None: ...

    def act(self, obs: ObservationFrame,
            history: Sequence[ObservationFrame]) -> str: ...


class GreedyAgent:
    """Sensor-only baseline: turn to the goal bearing, advance when clear.

    Deterministic; uses the depth scan to gate forward motion and to pick an
    avoidance turn direction, and stops once the goal vector is short.
    """

    stop_distance = 0.30

    def __init__(self, agent: AgentSpec = AgentSpec()):
        self.spec = agent

    def begin_episode(self, episode: Episode) -> None:
        pass

    def act(self, obs: ObservationFrame,
            history: Sequence[ObservationFrame]) -> str:
        gx, gy = obs.goal_ego
        if math.hypot(gx, gy) <= self.stop_distance:
            return STOP
        bearing = math.atan2(gy, gx)
        if abs(bearing) > self.spec.theta_step / 2:
            return TURN_LEFT if bearing > 0 else TURN_RIGHT
        n = len(obs.depths)
        center = float(min(obs.depths[(n - 1) // 2], obs.depths[n // 2]))
        if center > self.spec.d_step + self.spec.r_robot:
            return MOVE_FORWARD
        # float64 accumulation so protocol-side replicas reproduce the choice
        left = float(np.mean(obs.depths[: n // 2], dtype=np.float64))
        right = float(np.mean(obs.depths[n - n // 2:], dtype=np.float64))
        return TURN_LEFT if left >= right else TURN_RIGHT


class OracleAgent:
    """Privileged upper bound: plans on the expert-margin map per goal.

    Path following with the lookahead controller is the normal mode.  Every
    forward command is first simulated against the robot's own navigation
    grid; a blocked one falls back to steepest descent on the episode's goal
    distance field over the 12 reachable headings, so the oracle never emits
    a colliding step and every accepted forward step strictly reduces the
    goal distance.  Goals whose surroundings admit no expert-margin plan are
    handled by descent alone; if no descending heading exists at all the
    episode is flagged "stuck" and the oracle idles at STOP.
    """

    # minimum goal-distance decrease for a descent step to count as progress
    descent_eps = 0.02

    def __init__(self, margin: float = 0.23):
        self.margin = margin
        self.flag: Optional[str] = None
        self._episode: Optional[Episode] = None
        self._plan_nav: Optional[InflatedGrid] = None
        self._path: Optional[PlannedPath] = None
        self._goal: Optional[tuple[float, float]] = None
        self._descent_heading: Optional[float] = None

    def begin_episode(self, episode: Episode) -> None:
        self._episode = episode
        self._plan_nav = inflate(episode.scene, self.margin)
        self._path = None
        self._goal = None
        self._descent_heading = None
        self.flag = None

    def act(self, obs: ObservationFrame,
            history: Sequence[ObservationFrame]) -> str:
        ep = self._episode
        if ep.state.current_goal != self._goal:
            self._replan()
        if ep.dtg() <= ep.agent.goal_radius:
            return STOP
        # Descent mode stays in charge until its forward step is taken;
        # otherwise the path controller would immediately turn back and the
        # two policies could alternate forever.
        if self._descent_heading is None:
            action = self._controller_action() if self._path is not None else None
            if action == MOVE_FORWARD and self._peek(ep.state.pose.yaw).collided:
                action = None
            if action is not None:
                return action
            self._descent_heading = self._select_descent_heading()
            if self._descent_heading is None:
                self.flag = "stuck"
                return STOP  # no safe progress; let the episode time out
        return self._descent_step()

    def _replan(self) -> None:
        ep = self._episode
        goal_radius = ep.agent.goal_radius
        self._goal = ep.state.current_goal
        self._descent_heading = None
        start = self._nearest_plannable(ep.state.pose.position(), goal_radius)
        target = self._nearest_plannable(self._goal, goal_radius)
        self._path = None
        if start is not None and target is not None:
            self._path = plan_path(ep.scene, start, target, self.margin,
                                   nav=self._plan_nav)

    def _nearest_plannable(self, point: tuple[float, float],
                           radius: float) -> Optional[tuple[float, float]]:
        nav = self._plan_nav
        res = nav.resolution
        ix, iy = point_to_cell(point[0], point[1], res)
        if not nav.blocked_at_cell(ix, iy):
            return point
        best, best_d = None, math.inf
        reach = int(math.ceil(radius / res)) + 1
        for dy in range(-reach, reach + 1):
            for dx in range(-reach, reach + 1):
                jx, jy = ix + dx, iy + dy
                if nav.blocked_at_cell(jx, jy):
                    continue
                cx, cy = cell_center(jx, jy, res)
                d = math.hypot(cx - point[0], cy - point[1])
                if d <= radius and d < best_d:
                    best, best_d = (cx, cy), d
        return best

    def _controller_action(self) -> str:
        ep = self._episode
        pose = ep.state.pose
        wps = self._path.waypoints
        d_wp = np.hypot(wps[:, 0] - pose.x, wps[:, 1] - pose.y)
        cursor = int(np.argmin(d_wp))
        along = float(d_wp[cursor])
        target = wps[-1]
        lookahead = 2.0 * ep.agent.d_step
        for m in range(cursor, len(wps)):
            if along >= lookahead:
                target = wps[m]
                break
            if m < len(wps) - 1:
                along += float(math.hypot(wps[m + 1, 0] - wps[m, 0],
                                          wps[m + 1, 1] - wps[m, 1]))
        err = normalize_yaw(math.atan2(target[1] - pose.y, target[0] - pose.x)
                            - pose.yaw)
        if abs(err) > ep.agent.theta_step / 2:
            return TURN_LEFT if err > 0 else TURN_RIGHT
        return MOVE_FORWARD

    def _peek(self, yaw: float):
        ep = self._episode
        pose = ep.state.pose
        return execute_action(Pose(pose.x, pose.y, normalize_yaw(yaw)),
                              MOVE_FORWARD, ep.agent, ep.nav)

    def _select_descent_heading(self) -> Optional[float]:
        """Heading whose safe forward step descends the goal distance the
        most (ties: fewest turns, then left); None when nothing descends."""
        ep = self._episode
        here = ep.dtg()
        best = None  # (drop, -|k|, k, heading)
        for k in range(-5, 7):
            heading = normalize_yaw(ep.state.pose.yaw + k * ep.agent.theta_step)
            out = self._peek(heading)
            if out.collided:
                continue
            drop = here - ep.dtg(out.new_pose)
            if drop < self.descent_eps:
                continue
            cand = (drop, -abs(k), k, heading)
            if best is None or cand > best:
                best = cand
        return best[3] if best is not None else None

    def _descent_step(self) -> str:
        """One step toward the locked descent heading; forward releases it."""
        ep = self._episode
        err = normalize_yaw(self._descent_heading - ep.state.pose.yaw)
        if abs(err) > ep.agent.theta_step / 2:
            return TURN_LEFT if err > 0 else TURN_RIGHT
        self._descent_heading = None
        if self._peek(ep.state.pose.yaw).collided:
            # world is static so this cannot normally happen; re-enter selection
            return TURN_LEFT
        return MOVE_FORWARD


def oracle_agent(margin: float = 0.23) -> OracleAgent:
    return OracleAgent(margin)


def greedy_agent(agent: AgentSpec = AgentSpec()) -> GreedyAgent:
    return GreedyAgent(agent)


# -- evaluation loop ---------------------------------------------------------


def run_episode(scn: ScenarioSet, ep_spec: ScenarioEpisode, agent: NavAgent,
                cache: Optional[SceneCache] = None) -> EpisodeRow:
    cache = cache or SceneCache(scn.scene_params, scn.agent_spec)
    grid, nav = cache.get(ep_spec.scene_seed)
    config = replace(scn.episode_config, seed=ep_spec.episode_seed)
    episode = Episode(grid, config, scn.agent_spec, scn.sensor_spec, nav=nav)
    state, obs = episode.reset()
    history = ObservationHistory(scn.sensor_spec.history)
    history.push(obs)
    agent.begin_episode(episode)
    flag = None
    while state.status == RUNNING:
        action = agent.act(obs, history.stacked())
        if action not in ACTIONS:
            flag = "protocol"
            break
        result = episode.step(action)
        obs = result.observation
        history.push(obs)
    if flag == "protocol":
        return EpisodeRow(ep_spec.scene_id, ep_spec.episode_seed, 0, False,
                          state.distance_traveled, state.total_steps,
                          FAIL_PROTOCOL, flag="protocol")
    return EpisodeRow(ep_spec.scene_id, ep_spec.episode_seed,
                      state.goals_reached, state.status == FAIL_COLLISION,
                      state.distance_traveled, state.total_steps, state.status,
                      flag=getattr(agent, "flag", None))


def run_eval(scn: ScenarioSet, agent: NavAgent,
             progress: Optional[Callable[[int, int], None]] = None) -> EvalReport:
    """Run every scenario episode to termination and aggregate the report.

    ``begin_episode`` is invoked before each episode, so a stateful agent is
    fully re-evaluable: the same agent on the same scenario set reproduces
    the same report.
    """
    cache = SceneCache(scn.scene_params, scn.agent_spec)
    rows = []
    for i, ep_spec in enumerate(scn.episodes):
        rows.append(run_episode(scn, ep_spec, agent, cache))
        if progress is not None:
            progress(i + 1, len(scn.episodes))
    sr1, expected, cpk = compute_metrics(rows)
    return EvalReport(sr1, expected, cpk, tuple(rows))
