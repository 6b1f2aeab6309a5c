# Constrained-reward scoring: rank expert candidates against both sets.

import numpy as np

from rvnsim import CorConfig, cor, select, set_distance, trajectory_to_action

rng = np.random.default_rng(8)

# eight candidate trajectories from a hypothetical "safe" sampler: forward
# arcs with mild noise; the "unsafe" sampler veers left into a wall
def arc(curvature, noise=0.0):
    s = np.linspace(0.3, 2.0, 8)
    pts = np.column_stack([s, curvature * s**2])
    return pts + rng.normal(scale=noise, size=pts.shape)

experts = [arc(c, noise=0.03) for c in np.linspace(-0.08, 0.08, 8)]
negatives = [arc(c, noise=0.03) for c in np.linspace(0.35, 0.55, 8)]

sample = experts[0]
print(f"RMS distance to expert set   {set_distance(sample, experts):.3f}")
print(f"RMS distance to negative set {set_distance(sample, negatives):.3f}")
print(f"score of experts[0]          {cor(sample, experts, negatives):.3f}")

result = select(experts, negatives, CorConfig(alpha=1.0))
print("scores:", np.round(result.scores, 3))
print(f"chosen index {result.index} (lowest score, ties to lowest index)")

chosen = experts[result.index]
print("emitted action:", trajectory_to_action(chosen))

# scoring is symmetric: swapping the two sets complements the score
swapped = cor(sample, negatives, experts)
print(f"complementarity: {cor(sample, experts, negatives) + swapped:.12f}")
