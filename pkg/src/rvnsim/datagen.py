"""Trajectory dataset generation.

Expert records come from following an A* path planned on a map inflated by a
margin *larger* than the robot radius (safe clearance); negative records from
a margin *smaller* than the radius, so the discrete-action follower
eventually clips an obstacle.  A negative record keeps a window of ``k_pre``
frames before the collision, the collision frame itself, and ``k_post``
synthesized post-collision frames whose pose and observation are frozen at
the collision frame.

On disk a record is a directory ``<root>/<scene_id>/<seed>/`` holding:

* ``manifest.json`` -- scene_id, kind ("expert"|"negative"), seed, k_pre,
  k_post, collision_index (null for expert), path_length_m, and poses as
  ``[x, y, yaw]`` triples printed with 9 decimal digits.
* ``obs.bin`` -- little-endian: magic ``RVNOBS1\\0``, u32 frame count, u32
  n_rays, then per frame n_rays f32 depths followed by 2 f32 goal components.
"""

from __future__ import annotations

import heapq
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DatasetGenerationError, InvalidStateError, RecordFormatError
from .kinematics import (
    MOVE_FORWARD,
    STOP,
    TURN_LEFT,
    TURN_RIGHT,
    AgentSpec,
    Pose,
    execute_action,
    normalize_yaw,
)
from .sensing import ObservationFrame, SensorSpec, render
from .world import (
    KEY_AXIS,
    KEY_DIAG,
    InflatedGrid,
    OccupancyGrid,
    cell_center,
    geodesic_field,
    inflate,
    keys_to_meters,
    point_to_cell,
    sample_navigable_point,
)

EXPERT = "expert"
NEGATIVE = "negative"

REACHED = "REACHED"
COLLIDED = "COLLIDED"
STALLED = "STALLED"

OBS_MAGIC = b"RVNOBS1\x00"


@dataclass(frozen=True)
class PlannerConfig:
    """Dataset-generation margins and filters (defaults assume r_robot 0.18)."""

    margin_expert: float = 0.23
    margin_negative: float = 0.10
    d_min: float = 4.0
    d_max: float = 8.0
    k_pre: int = 8
    k_post: int = 6

    def validate_against(self, agent: AgentSpec) -> None:
        if not (self.margin_expert > agent.r_robot > self.margin_negative >= 0):
            raise ValueError(
                "need margin_expert > r_robot > margin_negative >= 0")


@dataclass(frozen=True)
class PlannedPath:
    waypoints: np.ndarray  # (N, 2) world points, cell centers
    length_m: float


def plan_path(grid: OccupancyGrid, start: tuple[float, float],
              goal: tuple[float, float], margin: float,
              d_min: Optional[float] = None, d_max: Optional[float] = None,
              nav: Optional[InflatedGrid] = None) -> Optional[PlannedPath]:
    """Optimal 8-connected A* path on the margin-inflated grid.

    Returns None when either endpoint is blocked at this margin, the goal is
    unreachable, or (if a band is given) the path length falls outside
    [d_min, d_max].
    """
    nav = nav if nav is not None else inflate(grid, margin)
    res = nav.resolution
    start_cell = point_to_cell(start[0], start[1], res)
    goal_cell = point_to_cell(goal[0], goal[1], res)
    if nav.blocked_at_cell(*start_cell) or nav.blocked_at_cell(*goal_cell):
        return None
    cells, key = _astar(nav.cells, start_cell, goal_cell)
    if cells is None:
        return None
    length = float(keys_to_meters(key, res))
    if d_min is not None and not (d_min <= length <= (d_max if d_max is not None else math.inf)):
        return None
    waypoints = np.array([cell_center(ix, iy, res) for ix, iy in cells])
    return PlannedPath(waypoints, length)


_NEIGHBORS = ((1, 0, KEY_AXIS), (-1, 0, KEY_AXIS), (0, 1, KEY_AXIS), (0, -1, KEY_AXIS),
              (1, 1, KEY_DIAG), (1, -1, KEY_DIAG), (-1, 1, KEY_DIAG), (-1, -1, KEY_DIAG))


def _astar(blocked: np.ndarray, start: tuple[int, int],
           goal: tuple[int, int]):
    """Integer-key A* with an octile heuristic; exact optimal cost."""
    h, w = blocked.shape
    gx, gy = goal

    def heur(x: int, y: int) -> int:
        dx, dy = abs(x - gx), abs(y - gy)
        lo = min(dx, dy)
        return (max(dx, dy) - lo) * KEY_AXIS + lo * KEY_DIAG

    start_flat = start[1] * w + start[0]
    goal_flat = gy * w + gx
    g = {start_flat: 0}
    parent: dict[int, int] = {}
    closed: set[int] = set()
    counter = 0
    heap = [(heur(*start), 0, start_flat)]
    blocked_flat = blocked.ravel()
    while heap:
        _, _, node = heapq.heappop(heap)
        if node in closed:
            continue
        closed.add(node)
        if node == goal_flat:
            cells = []
            cur = node
            while True:
                cells.append((cur % w, cur // w))
                if cur == start_flat:
                    break
                cur = parent[cur]
            cells.reverse()
            return cells, g[node]
        x, y = node % w, node // w
        base = g[node]
        for dx, dy, cost in _NEIGHBORS:
            nx, ny = x + dx, y + dy
            if nx < 0 or ny < 0 or nx >= w or ny >= h:
                continue
            nflat = ny * w + nx
            if blocked_flat[nflat] or nflat in closed:
                continue
            ng = base + cost
            old = g.get(nflat)
            if old is None or ng < old:
                g[nflat] = ng
                parent[nflat] = node
                counter += 1
                heapq.heappush(heap, (ng + heur(nx, ny), counter, nflat))
    return None, None


@dataclass(frozen=True)
class FollowResult:
    status: str  # REACHED | COLLIDED | STALLED
    poses: list[Pose]  # pose per timestep, index 0 = start
    actions: list[str]
    t_c: Optional[int]  # frame index of the collision pose, COLLIDED only


def follow_path(grid: OccupancyGrid, spec: AgentSpec, path: PlannedPath,
                start_yaw: float, nav: Optional[InflatedGrid] = None) -> FollowResult:
    """Greedy lookahead controller over discrete actions.

    Targets the first waypoint at least ``2 * d_step`` along the remaining
    path; turns when the heading error exceeds half the turn angle, else
    moves forward.  Ends REACHED within the goal radius of the final
    waypoint, COLLIDED on the first collision, or STALLED after
    ``4 * path_length / d_step`` steps.
    """
    nav = nav if nav is not None else inflate(grid, spec.r_robot)
    wps = path.waypoints
    pose = Pose(float(wps[0, 0]), float(wps[0, 1]), normalize_yaw(start_yaw))
    poses = [pose]
    actions: list[str] = []
    lookahead = 2.0 * spec.d_step
    seg = np.hypot(np.diff(wps[:, 0]), np.diff(wps[:, 1]))  # segment lengths
    max_steps = max(16, int(math.ceil(4.0 * path.length_m / spec.d_step)))
    cursor = 0
    final = wps[-1]
    for _ in range(max_steps):
        if math.hypot(pose.x - final[0], pose.y - final[1]) <= spec.goal_radius:
            return FollowResult(REACHED, poses, actions, None)
        d_wp = np.hypot(wps[cursor:, 0] - pose.x, wps[cursor:, 1] - pose.y)
        cursor += int(np.argmin(d_wp))
        along = float(d_wp[int(np.argmin(d_wp))])
        target = final
        for m in range(cursor, len(wps)):
            if along >= lookahead:
                target = wps[m]
                break
            if m < len(wps) - 1:
                along += float(seg[m])
        err = normalize_yaw(math.atan2(target[1] - pose.y, target[0] - pose.x)
                            - pose.yaw)
        if abs(err) > spec.theta_step / 2:
            action = TURN_LEFT if err > 0 else TURN_RIGHT
        else:
            action = MOVE_FORWARD
        outcome = execute_action(pose, action, spec, nav)
        pose = outcome.new_pose
        poses.append(pose)
        actions.append(action)
        if outcome.collided:
            return FollowResult(COLLIDED, poses, actions, len(poses) - 1)
    return FollowResult(STALLED, poses, actions, None)


@dataclass(frozen=True)
class TrajectoryFrame:
    x: float
    y: float
    yaw: float
    obs: ObservationFrame


@dataclass(frozen=True)
class TrajectoryRecord:
    scene_id: str
    kind: str  # EXPERT | NEGATIVE
    frames: list[TrajectoryFrame]
    collision_index: Optional[int]  # index into frames, NEGATIVE only
    seed: int
    path_length_m: float
    k_pre: int
    k_post: int


class PlannerContext:
    """Per-scene inflations shared across record generations."""

    def __init__(self, grid: OccupancyGrid, config: PlannerConfig = PlannerConfig(),
                 agent: AgentSpec = AgentSpec()):
        config.validate_against(agent)
        self.grid = grid
        self.config = config
        self.agent = agent
        self.nav_robot = inflate(grid, agent.r_robot)
        self.nav_expert = inflate(grid, config.margin_expert)
        self.nav_negative = inflate(grid, config.margin_negative)


def _sample_endpoints(ctx: PlannerContext, plan_nav: InflatedGrid,
                      start_nav: InflatedGrid, rng: np.random.Generator):
    """Random start (plus yaw) and an in-band goal on the planning grid."""
    start = sample_navigable_point(start_nav, rng)
    yaw = normalize_yaw(float(rng.uniform(-math.pi, math.pi)))
    field = geodesic_field(plan_nav, start)
    band = field.cells_in_band(ctx.config.d_min, ctx.config.d_max)
    if len(band) == 0:
        return start, yaw, None
    flat = int(band[rng.integers(len(band))])
    iy, ix = divmod(flat, plan_nav.width)
    return start, yaw, cell_center(ix, iy, plan_nav.resolution)


def _render_frames(ctx: PlannerContext, poses: list[Pose],
                   goal: tuple[float, float], sensor: SensorSpec) -> list[TrajectoryFrame]:
    return [TrajectoryFrame(p.x, p.y, p.yaw,
                            render(p, ctx.grid, goal, sensor)) for p in poses]


def generate_expert(grid: OccupancyGrid, config: PlannerConfig = PlannerConfig(),
                    agent: AgentSpec = AgentSpec(), sensor: SensorSpec = SensorSpec(),
                    seed: int = 0, ctx: Optional[PlannerContext] = None) -> TrajectoryRecord:
    """One collision-free goal-reaching record (up to 64 sampling retries)."""
    ctx = ctx if ctx is not None else PlannerContext(grid, config, agent)
    rng = np.random.default_rng(seed)
    for _ in range(64):
        start, yaw, goal = _sample_endpoints(ctx, ctx.nav_expert, ctx.nav_expert, rng)
        if goal is None:
            continue
        path = plan_path(grid, start, goal, config.margin_expert,
                         config.d_min, config.d_max, nav=ctx.nav_expert)
        if path is None:
            continue
        result = follow_path(grid, agent, path, yaw, nav=ctx.nav_robot)
        if result.status != REACHED:
            continue
        frames = _render_frames(ctx, result.poses, goal, sensor)
        return TrajectoryRecord(grid.scene_id, EXPERT, frames, None, seed,
                                path.length_m, config.k_pre, config.k_post)
    raise DatasetGenerationError(
        f"no expert trajectory for scene {grid.scene_id!r} seed {seed} in 64 tries")


def negative_window(t_c: int, total: int, k_pre: int, k_post: int) -> tuple[int, int]:
    """Inclusive frame window [t_i, t_f] recorded around a collision at t_c."""
    return max(0, t_c - k_pre), min(total, t_c + k_post)


def generate_negative(grid: OccupancyGrid, config: PlannerConfig = PlannerConfig(),
                      agent: AgentSpec = AgentSpec(), sensor: SensorSpec = SensorSpec(),
                      seed: int = 0, ctx: Optional[PlannerContext] = None) -> TrajectoryRecord:
    """One collision-ending record windowed around the collision frame.

    The path is planned on the under-inflated grid; runs that reach the goal
    without colliding are discarded and resampled (up to 64 times).  The
    recording freezes pose and observation after the collision, so the
    window's upper clamp is taken at ``t_c + k_post`` synthesized frames.
    """
    ctx = ctx if ctx is not None else PlannerContext(grid, config, agent)
    rng = np.random.default_rng(seed)
    for _ in range(64):
        # Starts must be valid robot poses, hence sampled at the robot margin;
        # every such cell is also free at the smaller negative margin.
        start, yaw, goal = _sample_endpoints(ctx, ctx.nav_negative, ctx.nav_robot, rng)
        if goal is None:
            continue
        path = plan_path(grid, start, goal, config.margin_negative,
                         config.d_min, config.d_max, nav=ctx.nav_negative)
        if path is None:
            continue
        result = follow_path(grid, agent, path, yaw, nav=ctx.nav_robot)
        if result.status != COLLIDED:
            continue
        t_c = result.t_c
        t_i, t_f = negative_window(t_c, t_c + config.k_post,
                                   config.k_pre, config.k_post)
        frames = _render_frames(ctx, result.poses[t_i:t_c + 1], goal, sensor)
        collision = frames[-1]
        frozen = [TrajectoryFrame(collision.x, collision.y, collision.yaw,
                                  collision.obs)] * (t_f - t_c)
        return TrajectoryRecord(grid.scene_id, NEGATIVE, frames + frozen,
                                t_c - t_i, seed, path.length_m,
                                config.k_pre, config.k_post)
    raise DatasetGenerationError(
        f"no colliding trajectory for scene {grid.scene_id!r} seed {seed} in 64 tries")


# ---------------------------------------------------------------------------
# Record IO
# ---------------------------------------------------------------------------


def record_dir(root: Path | str, record: TrajectoryRecord) -> Path:
    return Path(root) / record.scene_id / str(record.seed)


def save_record(record: TrajectoryRecord, root: Path | str) -> Path:
    out = record_dir(root, record)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_bytes(manifest_text(record).encode("utf-8"))
    (out / "obs.bin").write_bytes(obs_bytes(record))
    return out


def manifest_text(record: TrajectoryRecord) -> str:
    """Canonical manifest JSON; poses carry exactly 9 decimal digits."""
    poses = ",".join(
        f"[{f.x:.9f},{f.y:.9f},{f.yaw:.9f}]" for f in record.frames)
    ci = "null" if record.collision_index is None else str(record.collision_index)
    return ('{"scene_id":%s,"kind":%s,"seed":%d,"k_pre":%d,"k_post":%d,'
            '"collision_index":%s,"path_length_m":%.9f,"poses":[%s]}\n'
            % (json.dumps(record.scene_id), json.dumps(record.kind),
               record.seed, record.k_pre, record.k_post, ci,
               record.path_length_m, poses))


def obs_bytes(record: TrajectoryRecord) -> bytes:
    n_rays = len(record.frames[0].obs.depths)
    head = struct.pack("<8sII", OBS_MAGIC, len(record.frames), n_rays)
    return head + b"".join(f.obs.packed_bytes() for f in record.frames)


def load_record(path: Path | str) -> TrajectoryRecord:
    path = Path(path)
    try:
        meta = json.loads((path / "manifest.json").read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RecordFormatError(f"bad manifest under {path}: {exc}") from exc
    raw = (path / "obs.bin").read_bytes()
    if len(raw) < 16 or raw[:8] != OBS_MAGIC:
        raise RecordFormatError(f"bad obs.bin magic under {path}")
    count, n_rays = struct.unpack("<II", raw[8:16])
    frame_bytes = 4 * (n_rays + 2)
    if len(raw) != 16 + count * frame_bytes:
        raise RecordFormatError(f"obs.bin size mismatch under {path}")
    poses = meta["poses"]
    if len(poses) != count:
        raise RecordFormatError(
            f"manifest has {len(poses)} poses but obs.bin has {count} frames")
    frames = []
    for i, (x, y, yaw) in enumerate(poses):
        off = 16 + i * frame_bytes
        depths = np.frombuffer(raw, dtype="<f4", count=n_rays, offset=off)
        gx, gy = np.frombuffer(raw, dtype="<f4", count=2,
                               offset=off + 4 * n_rays)
        obs = ObservationFrame(depths, (float(gx), float(gy)))
        frames.append(TrajectoryFrame(float(x), float(y), float(yaw), obs))
    return TrajectoryRecord(meta["scene_id"], meta["kind"], frames,
                            meta["collision_index"], int(meta["seed"]),
                            float(meta["path_length_m"]),
                            int(meta["k_pre"]), int(meta["k_post"]))


# ---------------------------------------------------------------------------
# Replay validation
# ---------------------------------------------------------------------------

_POS_TOL = 1e-6
_YAW_TOL = 1e-6


def replay_record(record: TrajectoryRecord, grid: OccupancyGrid,
                  agent: AgentSpec = AgentSpec(), sensor: SensorSpec = SensorSpec(),
                  nav: Optional[InflatedGrid] = None) -> list[str]:
    """Check a record against the kinematics; returns violation messages.

    Re-derives each action from consecutive poses, re-executes it, re-renders
    observations (within raster quantization tolerance), and enforces the
    frozen post-collision window for negative records.
    """
    problems: list[str] = []
    nav = nav if nav is not None else inflate(grid, agent.r_robot)
    frames = record.frames
    t_c = record.collision_index
    if record.kind == NEGATIVE:
        if t_c is None or not (1 <= t_c <= record.k_pre):
            problems.append(f"collision_index {t_c} outside [1, k_pre]")
            return problems
        if len(frames) != t_c + record.k_post + 1:
            problems.append(
                f"frame count {len(frames)} != collision_index + k_post + 1")
    elif t_c is not None:
        problems.append("expert record carries a collision_index")

    goal = _recover_goal(frames[0])
    depth_tol = grid.resolution / 2
    last_checked = t_c if t_c is not None else len(frames) - 1
    for t, frame in enumerate(frames[:last_checked + 1]):
        rendered = render(Pose(frame.x, frame.y, frame.yaw), grid, goal, sensor)
        if not np.allclose(rendered.depths, frame.obs.depths, atol=depth_tol):
            problems.append(f"frame {t}: depths diverge from re-render")
        if not np.allclose(np.float32(rendered.goal_ego),
                           np.float32(frame.obs.goal_ego), atol=1e-4):
            problems.append(f"frame {t}: goal vector diverges from re-render")

    for t in range(len(frames) - 1):
        a, b = frames[t], frames[t + 1]
        if t_c is not None and t >= t_c:
            if (a.x, a.y, a.yaw) != (b.x, b.y, b.yaw):
                problems.append(f"frame {t + 1}: post-collision pose not frozen")
            if b.obs.packed_bytes() != frames[t_c].obs.packed_bytes():
                problems.append(f"frame {t + 1}: post-collision observation not frozen")
            continue
        action = _infer_action(a, b, agent, into_collision=(t + 1 == t_c))
        if action is None:
            problems.append(f"step {t}: transition is not a legal action")
            continue
        try:
            out = execute_action(Pose(a.x, a.y, a.yaw), action, agent, nav)
        except InvalidStateError as exc:
            problems.append(f"step {t}: {exc}")
            continue
        if math.hypot(out.new_pose.x - b.x, out.new_pose.y - b.y) > _POS_TOL \
                or abs(normalize_yaw(out.new_pose.yaw - b.yaw)) > _YAW_TOL:
            problems.append(f"step {t}: {action} does not reproduce the next pose")
        expected_collision = t + 1 == t_c
        if out.collided != expected_collision:
            problems.append(
                f"step {t}: collided={out.collided}, expected {expected_collision}")

    if record.kind == EXPERT:
        ex, ey = frames[-1].obs.goal_ego
        if math.hypot(ex, ey) > agent.goal_radius + grid.resolution:
            problems.append("expert record does not end at the goal")
    return problems


def _recover_goal(frame: TrajectoryFrame) -> tuple[float, float]:
    ex, ey = frame.obs.goal_ego
    c, s = math.cos(frame.yaw), math.sin(frame.yaw)
    return (frame.x + c * ex - s * ey, frame.y + s * ex + c * ey)


def _infer_action(a: TrajectoryFrame, b: TrajectoryFrame, agent: AgentSpec,
                  into_collision: bool) -> Optional[str]:
    if into_collision:
        return MOVE_FORWARD  # only forward motion can collide
    moved = math.hypot(b.x - a.x, b.y - a.y)
    dyaw = normalize_yaw(b.yaw - a.yaw)
    if moved <= _POS_TOL:
        if abs(dyaw - agent.theta_step) <= _YAW_TOL:
            return TURN_LEFT
        if abs(dyaw + agent.theta_step) <= _YAW_TOL:
            return TURN_RIGHT
        if abs(dyaw) <= _YAW_TOL:
            return STOP
        return None
    if abs(dyaw) <= _YAW_TOL:
        return MOVE_FORWARD
    return None
