# Episode mechanics: sequential goals, shaped rewards, and terminal cases.

from rvnsim import Episode, EpisodeConfig, generate_scene
from rvnsim.evalharness import oracle_agent
from rvnsim.sensing import ObservationHistory
from rvnsim.world import SceneParams

scene = generate_scene(9, SceneParams(width_m=12.0, height_m=12.0))
config = EpisodeConfig(n_goal=2, seed=5)
episode = Episode(scene, config)
state, obs = episode.reset()
gx, gy = state.current_goal
print(f"spawn ({state.pose.x:.2f}, {state.pose.y:.2f}), "
      f"goal ({gx:.2f}, {gy:.2f}), dtg {episode.dtg():.2f} m")

# let the privileged planner drive and watch the reward ledger
agent = oracle_agent()
agent.begin_episode(episode)
history = ObservationHistory(episode.sensor.history)
history.push(obs)

total_reward = total_cost = 0.0
while state.status == "RUNNING":
    action = agent.act(obs, history.stacked())
    result = episode.step(action)
    obs = result.observation
    history.push(obs)
    total_reward += result.reward
    total_cost += result.cost
    if result.info["goal_reached"]:
        print(f"  step {state.total_steps:3d}: goal banked (+1.0), "
              f"next dtg {result.info['dtg']:.2f} m")

print(f"status {state.status}: {state.goals_reached} goals, "
      f"{state.total_steps} steps, {state.distance_traveled:.2f} m traveled")
print(f"return {total_reward:.3f}, safety cost {total_cost:.1f}, "
      f"collisions {state.collisions}")
