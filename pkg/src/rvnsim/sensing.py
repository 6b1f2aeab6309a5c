"""Pseudo-visual sensing: egocentric ray-cast depth scans.

A scan stands in for a camera image: ``n_rays`` rays evenly spanning the
field of view (index 0 = leftmost) are cast against the raw obstacle raster
and report the distance to the first blocked sample, clipped to the maximum
range.  Each frame also carries the goal expressed in the agent frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kinematics import Pose, relative_goal
from .world import OccupancyGrid

_MARCH_DIVISOR = 4  # rays sampled every resolution/4 meters


@dataclass(frozen=True)
class SensorSpec:
    n_rays: int = 64
    fov: float = math.pi / 2
    max_range: float = 5.0
    history: int = 5  # number of past frames kept alongside the current one

    def __post_init__(self):
        if self.n_rays < 2:
            raise ValueError("n_rays must be >= 2")
        if not (0 < self.fov <= math.tau):
            raise ValueError("fov must be in (0, 2*pi]")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.history < 0:
            raise ValueError("history must be >= 0")

    def ray_offsets(self) -> np.ndarray:
        """Angular offsets from the heading, leftmost first."""
        half = self.fov / 2
        return np.linspace(half, -half, self.n_rays)


@dataclass(frozen=True)
class ObservationFrame:
    """One sensing step: float32 depths plus the egocentric goal vector."""

    depths: np.ndarray
    goal_ego: tuple[float, float]

    def packed_bytes(self) -> bytes:
        """Canonical little-endian f32 layout used by the dataset format."""
        goal = np.asarray(self.goal_ego, dtype="<f4")
        return self.depths.astype("<f4").tobytes() + goal.tobytes()


def render(pose: Pose, grid: OccupancyGrid, goal: tuple[float, float],
           spec: SensorSpec = SensorSpec()) -> ObservationFrame:
    """Cast the scan from ``pose`` against the raw grid.

    Depths are the distance to the first sample falling in an obstacle cell
    (sampled every resolution/4), clipped to ``max_range``; worlds are closed
    so rays always terminate at the border if nothing nearer is hit.
    """
    angles = pose.yaw + spec.ray_offsets()
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (n_rays, 2)
    h = grid.resolution / _MARCH_DIVISOR
    n = int(math.ceil(spec.max_range / h))
    deltas = np.minimum(np.arange(1, n + 1) * h, spec.max_range)  # (n,)
    points = (np.array([pose.x, pose.y])
              + deltas[None, :, None] * dirs[:, None, :])  # (n_rays, n, 2)
    blocked = grid.blocked_at_points(points)  # (n_rays, n)
    any_hit = blocked.any(axis=1)
    first = np.argmax(blocked, axis=1)
    depths = np.where(any_hit, deltas[first], spec.max_range)
    depths = np.minimum(depths, spec.max_range).astype(np.float32)
    depths.setflags(write=False)
    return ObservationFrame(depths, relative_goal(pose, goal))


def history_stack(frames: Sequence[ObservationFrame], c: int) -> list[ObservationFrame]:
    """Most recent ``c + 1`` frames, oldest first.

    Before c+1 frames exist the earliest frame is repeated as left padding.
    """
    if not frames:
        raise ValueError("need at least one frame")
    tail = list(frames[-(c + 1):])
    pad = [frames[0]] * (c + 1 - len(tail))
    return pad + tail


class ObservationHistory:
    """Ring of past frames feeding :func:`history_stack`."""

    def __init__(self, c: int):
        self.c = c
        self._frames: list[ObservationFrame] = []

    def push(self, frame: ObservationFrame) -> None:
        self._frames.append(frame)
        # only the padding source (frame 0 stand-in) plus the last c+1 matter
        if len(self._frames) > self.c + 2:
            del self._frames[1]

    def stacked(self) -> list[ObservationFrame]:
        return history_stack(self._frames, self.c)

    def clear(self) -> None:
        self._frames.clear()
