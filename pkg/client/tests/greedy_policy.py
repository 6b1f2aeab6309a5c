"""Sensor-only greedy policy scripted over the client, mirroring the
environment's built-in greedy baseline (default agent constants)."""

from __future__ import annotations

import math

import numpy as np

R_ROBOT = 0.18
D_STEP = 0.25
THETA_STEP = math.radians(30.0)
STOP_DISTANCE = 0.30


def greedy_action(depths: np.ndarray, goal: tuple[float, float]) -> str:
    gx, gy = goal
    if math.hypot(gx, gy) <= STOP_DISTANCE:
        return "STOP"
    bearing = math.atan2(gy, gx)
    if abs(bearing) > THETA_STEP / 2:
        return "TURN_LEFT" if bearing > 0 else "TURN_RIGHT"
    n = len(depths)
    center = float(min(depths[(n - 1) // 2], depths[n // 2]))
    if center > D_STEP + R_ROBOT:
        return "MOVE_FORWARD"
    left = float(np.mean(depths[: n // 2], dtype=np.float64))
    right = float(np.mean(depths[n - n // 2:], dtype=np.float64))
    return "TURN_LEFT" if left >= right else "TURN_RIGHT"
