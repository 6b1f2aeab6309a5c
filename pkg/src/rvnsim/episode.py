"""Episodic task state machine.

An episode spawns the agent at a random pose, then serves sequential goals
sampled at a geodesic distance within [d_min, d_max] of the agent.  Stopping
within the goal radius banks the goal and immediately yields the next one;
the episode ends on the first collision, on a per-goal step timeout, or after
``n_goal`` goals (success).

Reward per step:

* goal reached (STOP within the goal radius): ``reward_goal``
* collision: ``reward_collision`` (terminal), plus ``collision_cost`` as the
  safety cost channel
* otherwise: ``-(dtg_after - dtg_before) - step_penalty`` where dtg is the
  geodesic distance to the current goal

The episode trace is a pure function of (scene, config.seed, action sequence).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EpisodeFinishedError, GoalExhaustedError, SceneUnusableError
from .kinematics import (
    ACTIONS,
    STOP,
    AgentSpec,
    Pose,
    execute_action,
    normalize_yaw,
)
from .sensing import ObservationFrame, SensorSpec, render
from .world import (
    DistanceField,
    InflatedGrid,
    OccupancyGrid,
    cell_center,
    geodesic_field,
    inflate,
    sample_navigable_point,
)

RUNNING = "RUNNING"
SUCCESS = "SUCCESS"
FAIL_COLLISION = "FAIL_COLLISION"
FAIL_TIMEOUT = "FAIL_TIMEOUT"
STATUSES = (RUNNING, SUCCESS, FAIL_COLLISION, FAIL_TIMEOUT)


@dataclass(frozen=True)
class EpisodeConfig:
    n_goal: int = 32
    d_min: float = 4.0
    d_max: float = 8.0
    t_max: int = 500  # per-goal step budget
    reward_goal: float = 1.0
    reward_collision: float = -0.1
    step_penalty: float = 0.01
    collision_cost: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.d_min < self.d_max):
            raise ValueError("need 0 < d_min < d_max")
        if self.n_goal < 1 or self.t_max < 1:
            raise ValueError("n_goal and t_max must be >= 1")


@dataclass
class EpisodeState:
    scene: OccupancyGrid
    pose: Pose
    current_goal: tuple[float, float]
    goals_reached: int = 0
    steps_since_goal: int = 0
    total_steps: int = 0
    distance_traveled: float = 0.0
    collisions: int = 0
    status: str = RUNNING


@dataclass(frozen=True)
class StepResult:
    observation: ObservationFrame
    reward: float
    cost: float
    done: bool
    info: dict


class Episode:
    """Single-owner mutable episode over an immutable scene."""

    def __init__(self, scene: OccupancyGrid, config: EpisodeConfig = EpisodeConfig(),
                 agent: AgentSpec = AgentSpec(), sensor: SensorSpec = SensorSpec(),
                 nav: Optional[InflatedGrid] = None):
        self.scene = scene
        self.config = config
        self.agent = agent
        self.sensor = sensor
        self.nav = nav if nav is not None else inflate(scene, agent.r_robot)
        self.state: Optional[EpisodeState] = None
        self._rng: Optional[np.random.Generator] = None
        self._goal_field: Optional[DistanceField] = None

    # -- lifecycle ----------------------------------------------------------

    def reset(self) -> tuple[EpisodeState, ObservationFrame]:
        """Spawn at a random pose and sample the first goal (seeded).

        Raises :class:`SceneUnusableError` when no start pose admits a goal in
        the configured distance band after 128 resamples.
        """
        self._rng = np.random.default_rng(self.config.seed)
        for _ in range(128):
            x, y = sample_navigable_point(self.nav, self._rng)
            yaw = normalize_yaw(float(self._rng.uniform(-np.pi, np.pi)))
            pose = Pose(x, y, yaw)
            goal = self._draw_goal(pose)
            if goal is None:
                continue
            self.state = EpisodeState(self.scene, pose, goal)
            self._goal_field = geodesic_field(self.nav, goal)
            return self.state, self._observe()
        raise SceneUnusableError(
            f"no start pose admits a goal in [{self.config.d_min}, "
            f"{self.config.d_max}] m after 128 resamples")

    def _draw_goal(self, pose: Pose) -> Optional[tuple[float, float]]:
        """Uniform free cell with geodesic distance from pose in the band."""
        pose_field = geodesic_field(self.nav, (pose.x, pose.y))
        candidates = pose_field.cells_in_band(self.config.d_min, self.config.d_max)
        if len(candidates) == 0:
            return None
        flat = int(candidates[self._rng.integers(len(candidates))])
        iy, ix = divmod(flat, self.nav.width)
        return cell_center(ix, iy, self.nav.resolution)

    def sample_goal(self) -> tuple[float, float]:
        """Next goal from the current pose; raises GoalExhaustedError if none."""
        goal = self._draw_goal(self.state.pose)
        if goal is None:
            raise GoalExhaustedError("no free cell in the goal distance band")
        return goal

    # -- stepping -----------------------------------------------------------

    def dtg(self, pose: Optional[Pose] = None) -> float:
        """Geodesic distance from a pose (default: current) to the goal."""
        p = pose if pose is not None else self.state.pose
        return self._goal_field.at(p.x, p.y)

    def step(self, action: str) -> StepResult:
        if self.state is None:
            raise EpisodeFinishedError("reset() the episode before stepping")
        if self.state.status != RUNNING:
            raise EpisodeFinishedError(f"episode already {self.state.status}")
        if action not in ACTIONS:
            raise ValueError(f"unknown action {action!r}")
        st = self.state
        cfg = self.config
        dtg_before = self.dtg(st.pose)
        outcome = execute_action(st.pose, action, self.agent, self.nav)
        st.pose = outcome.new_pose
        st.total_steps += 1
        st.distance_traveled += outcome.displacement
        dtg_after = self.dtg(st.pose)

        goal_reached = False
        goal_exhausted = False
        if outcome.collided:
            reward = cfg.reward_collision
            cost = cfg.collision_cost
            st.collisions += 1
            st.status = FAIL_COLLISION
        elif action == STOP and dtg_before <= self.agent.goal_radius:
            reward = cfg.reward_goal
            cost = 0.0
            goal_reached = True
            st.goals_reached += 1
            if st.goals_reached >= cfg.n_goal:
                st.status = SUCCESS
            else:
                try:
                    st.current_goal = self.sample_goal()
                    self._goal_field = geodesic_field(self.nav, st.current_goal)
                    st.steps_since_goal = 0
                except GoalExhaustedError:
                    goal_exhausted = True
                    st.status = FAIL_TIMEOUT
        else:
            # STOP away from the goal is a penalized no-op step.
            reward = -(dtg_after - dtg_before) - cfg.step_penalty
            cost = 0.0

        st.steps_since_goal += 1
        if st.status == RUNNING and st.steps_since_goal > cfg.t_max:
            st.status = FAIL_TIMEOUT

        done = st.status != RUNNING
        obs = self._observe()
        info = {
            "collided": outcome.collided,
            "goal_reached": goal_reached,
            "dtg": self.dtg(st.pose),
            "status": st.status,
        }
        if goal_exhausted:
            info["goal_exhausted"] = True
        return StepResult(obs, reward, cost, done, info)

    def _observe(self) -> ObservationFrame:
        return render(self.state.pose, self.scene, self.state.current_goal,
                      self.sensor)
