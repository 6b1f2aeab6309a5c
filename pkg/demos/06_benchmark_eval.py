# A miniature benchmark: scenario splits, the two reference agents, metrics.

from rvnsim import EpisodeConfig, build_scenarios, run_eval
from rvnsim.evalharness import greedy_agent, oracle_agent
from rvnsim.world import SceneParams

config = EpisodeConfig(n_goal=2)
scenarios = build_scenarios([61, 62, 63], "TEST", episode_config=config,
                            scene_params=SceneParams(width_m=12.0, height_m=12.0))
print(f"{scenarios.split}: {len(scenarios.episodes)} episodes "
      f"({scenarios.episodes_per_scene} per scene)")

for name, agent in (("oracle", oracle_agent()), ("greedy", greedy_agent())):
    report = run_eval(scenarios, agent)
    print(f"{name:6s}  SR1={report.sr1:.2f}  E(G)={report.expected_goals:.2f}  "
          f"CPK={report.cpk:.1f}")

report = run_eval(scenarios, greedy_agent())
print("\nper-episode rows (CSV):")
print("\n".join(report.to_csv().splitlines()[:6]))
