"""Agent pose and discrete action execution.

Motion is nonholonomic: the agent turns in place by a fixed angle or advances
along its heading.  A forward command is clamped at the first blocked
configuration-space cell along the heading ray (no tangential sliding), and a
collision is registered whenever the achieved displacement falls short of the
commanded step.  The blocked-region intersection is found by conservative ray
marching at ``resolution / 4``: the reported displacement is the largest
sampled collision-free distance, so the agent center never enters a blocked
cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError
from .world import InflatedGrid

MOVE_FORWARD = "MOVE_FORWARD"
TURN_LEFT = "TURN_LEFT"
TURN_RIGHT = "TURN_RIGHT"
STOP = "STOP"
ACTIONS = (MOVE_FORWARD, TURN_LEFT, TURN_RIGHT, STOP)

# Tolerance on the displacement comparison; avoids float false collisions at
# exactly d_step.
DISPLACEMENT_EPS = 1e-9

_MARCH_DIVISOR = 4  # forward motion sampled every resolution/4 meters


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    y = math.remainder(yaw, math.tau)
    if y <= -math.pi:
        return math.pi
    return y


@dataclass(frozen=True)
class Pose:
    """Agent position (meters) and yaw (radians, normalized to (-pi, pi])."""

    x: float
    y: float
    yaw: float

    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class AgentSpec:
    """Physical agent parameters.

    ``goal_radius`` is fixed at twice the robot radius; passing any other
    value is rejected.  ``h_robot`` and ``h_camera`` are metadata only —
    the geometry is 2D and never consults them.
    """

    r_robot: float = 0.18
    d_step: float = 0.25
    theta_step: float = math.radians(30.0)
    goal_radius: float | None = None
    h_robot: float = 1.0
    h_camera: float = 0.6

    def __post_init__(self):
        if self.r_robot <= 0 or self.d_step <= 0:
            raise ValueError("r_robot and d_step must be positive")
        if not (0 < self.theta_step <= math.pi):
            raise ValueError("theta_step must be in (0, pi]")
        if self.goal_radius is None:
            object.__setattr__(self, "goal_radius", 2.0 * self.r_robot)
        elif not math.isclose(self.goal_radius, 2.0 * self.r_robot):
            raise ValueError("goal_radius must equal 2 * r_robot")


@dataclass(frozen=True)
class MoveOutcome:
    new_pose: Pose
    displacement: float
    collided: bool


def forward_samples(d_step: float, resolution: float) -> np.ndarray:
    """Sample distances used for clamped forward motion (last = d_step)."""
    h = resolution / _MARCH_DIVISOR
    n = int(math.ceil(d_step / h))
    return np.minimum(np.arange(1, n + 1) * h, d_step)


def execute_action(pose: Pose, action: str, spec: AgentSpec,
                   nav: InflatedGrid) -> MoveOutcome:
    """Apply one discrete action against the configuration-space grid.

    ``nav`` is expected to be the base scene inflated by ``spec.r_robot``.
    Raises :class:`InvalidStateError` if the pose starts inside a blocked
    cell (episodes never construct this).
    """
    if nav.blocked_at(pose.x, pose.y):
        raise InvalidStateError(f"pose {pose} is inside a blocked cell")
    if action == STOP:
        return MoveOutcome(pose, 0.0, False)
    if action == TURN_LEFT:
        return MoveOutcome(
            Pose(pose.x, pose.y, normalize_yaw(pose.yaw + spec.theta_step)), 0.0, False)
    if action == TURN_RIGHT:
        return MoveOutcome(
            Pose(pose.x, pose.y, normalize_yaw(pose.yaw - spec.theta_step)), 0.0, False)
    if action != MOVE_FORWARD:
        raise ValueError(f"unknown action {action!r}")

    deltas = forward_samples(spec.d_step, nav.resolution)
    dx, dy = math.cos(pose.yaw), math.sin(pose.yaw)
    points = np.empty((len(deltas), 2))
    points[:, 0] = pose.x + deltas * dx
    points[:, 1] = pose.y + deltas * dy
    blocked = nav.blocked_at_points(points)
    if blocked.any():
        first = int(np.argmax(blocked))
        displacement = float(deltas[first - 1]) if first > 0 else 0.0
    else:
        displacement = float(spec.d_step)
    new_pose = Pose(pose.x + displacement * dx, pose.y + displacement * dy, pose.yaw)
    collided = displacement < spec.d_step - DISPLACEMENT_EPS
    return MoveOutcome(new_pose, displacement, collided)


def relative_goal(pose: Pose, goal: tuple[float, float]) -> tuple[float, float]:
    """Express a world goal in the agent frame: (x forward, y left)."""
    dx = goal[0] - pose.x
    dy = goal[1] - pose.y
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return (c * dx + s * dy, -s * dx + c * dy)
