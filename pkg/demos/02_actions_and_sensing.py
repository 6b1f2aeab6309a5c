# Discrete actions against the configuration space, plus ray-cast sensing.

import math

import numpy as np

from rvnsim import (
    AgentSpec,
    MOVE_FORWARD,
    Pose,
    SensorSpec,
    TURN_LEFT,
    execute_action,
    generate_scene,
    inflate,
    render,
)
from rvnsim.world import SceneParams, sample_navigable_point

scene = generate_scene(3, SceneParams(width_m=8.0, height_m=8.0))
agent = AgentSpec()  # r=0.18 m, step=0.25 m, turn=30 deg
nav = inflate(scene, agent.r_robot)

rng = np.random.default_rng(4)
x, y = sample_navigable_point(nav, rng)
pose = Pose(x, y, 0.0)
print(f"spawn at ({pose.x:.2f}, {pose.y:.2f})")

# drive forward until something blocks the commanded step
while True:
    out = execute_action(pose, MOVE_FORWARD, agent, nav)
    print(f"forward: displacement {out.displacement:.4f} m collided={out.collided}")
    pose = out.new_pose
    if out.collided:
        break

# turning is exact and reversible
left = execute_action(pose, TURN_LEFT, agent, nav).new_pose
print(f"yaw {math.degrees(pose.yaw):.0f} -> {math.degrees(left.yaw):.0f} deg")

# a 64-ray depth scan stands in for the camera; index 0 is the leftmost ray
sensor = SensorSpec()
frame = render(Pose(x, y, 0.0), scene, goal=pose.position(), spec=sensor)
depths = frame.depths
print(f"scan: min {depths.min():.2f} m  max {depths.max():.2f} m")
bar = "".join(" .:-=+*#"[min(7, int(d / sensor.max_range * 8))] for d in depths)
print("left |" + bar + "| right")
print(f"goal in agent frame: ({frame.goal_ego[0]:.2f}, {frame.goal_ego[1]:.2f})")
