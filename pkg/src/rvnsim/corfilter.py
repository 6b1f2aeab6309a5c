"""Constrained-reward trajectory scoring and selection.

Candidate trajectories are fixed-length sequences of egocentric waypoints.
A candidate is scored against an expert set and a negative set through a
Student-t-shaped kernel of its RMS distance to each set:

    w_k   = (1 + d_k / alpha) ** (-(alpha + 1) / 2)
    score = w_E / (w_E + w_N)

where ``d_k`` is the root mean square Euclidean distance between the
flattened candidate and the members of set k.  The score lies in (0, 1),
equals 0.5 when both distances match, decreases in d_E and increases in d_N.

Selection picks the expert candidate with the minimal score (each candidate
is scored against the full expert set, itself included); a leave-one-out
variant and a maximizing variant are available as config flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import MOVE_FORWARD, STOP, TURN_LEFT, TURN_RIGHT, AgentSpec

STOP_NORM = 0.05  # lookahead points closer than this emit STOP


@dataclass(frozen=True)
class CorConfig:
    alpha: float = 1.0
    k: int = 8
    leave_one_out: bool = False
    maximize: bool = False

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def as_trajectory(points) -> np.ndarray:
    """Validate and convert one candidate to a float (L, 2) array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError("a trajectory is a nonempty (L, 2) array of points")
    return arr


def _as_set(candidates) -> np.ndarray:
    if len(candidates) == 0:
        raise ValueError("candidate set must be nonempty")
    trajs = [as_trajectory(c) for c in candidates]
    lengths = {t.shape[0] for t in trajs}
    if len(lengths) != 1:
        raise ValueError(f"all candidates must share one length, got {sorted(lengths)}")
    return np.stack(trajs)


def set_distance(a, candidates) -> float:
    """RMS Euclidean distance from ``a`` to a set, over flattened 2L-vectors."""
    traj = as_trajectory(a)
    group = _as_set(candidates)
    if group.shape[1] != traj.shape[0]:
        raise ValueError("candidate lengths do not match")
    diff = group.reshape(len(group), -1) - traj.reshape(-1)
    return float(math.sqrt(np.mean(np.sum(diff * diff, axis=1))))


def _kernel(d: float, alpha: float) -> float:
    return (1.0 + d / alpha) ** (-(alpha + 1.0) / 2.0)


def cor(a, experts, negatives, config: CorConfig = CorConfig()) -> float:
    """Constrained reward of one candidate against expert/negative sets."""
    w_e = _kernel(set_distance(a, experts), config.alpha)
    w_n = _kernel(set_distance(a, negatives), config.alpha)
    return w_e / (w_e + w_n)


@dataclass(frozen=True)
class SelectionResult:
    index: int
    scores: np.ndarray

    @property
    def score(self) -> float:
        return float(self.scores[self.index])


def select(experts, negatives, config: CorConfig = CorConfig()) -> SelectionResult:
    """Score every expert candidate and pick the extremal one.

    Default is the minimizing rule with each candidate scored against the
    full expert set including itself; ties break to the lowest index.
    """
    expert_set = _as_set(experts)
    _as_set(negatives)
    scores = np.empty(len(expert_set))
    for i, cand in enumerate(expert_set):
        ref = (np.delete(expert_set, i, axis=0)
               if config.leave_one_out and len(expert_set) > 1 else expert_set)
        scores[i] = cor(cand, ref, negatives, config)
    index = int(np.argmax(scores)) if config.maximize else int(np.argmin(scores))
    scores.setflags(write=False)
    return SelectionResult(index, scores)


def trajectory_to_action(chosen, spec: AgentSpec = AgentSpec()) -> str:
    """Discrete action that best follows a chosen egocentric trajectory.

    The lookahead point is the first waypoint at least ``d_step`` away (else
    the last waypoint).  Degenerate lookaheads near the origin emit STOP;
    otherwise a bearing beyond half the turn angle emits the matching turn.
    """
    traj = as_trajectory(chosen)
    norms = np.hypot(traj[:, 0], traj[:, 1])
    ahead = np.flatnonzero(norms >= spec.d_step)
    point = traj[ahead[0]] if len(ahead) else traj[-1]
    if math.hypot(point[0], point[1]) < STOP_NORM:
        return STOP
    bearing = math.atan2(point[1], point[0])
    if abs(bearing) > spec.theta_step / 2:
        return TURN_LEFT if bearing > 0 else TURN_RIGHT
    return MOVE_FORWARD
