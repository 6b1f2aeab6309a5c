from __future__ import annotations

import json
import math

import numpy as np
import pytest

import oracles
from conftest import SMALL_SCENE, grid_from_lines
from rvnsim.datagen import (
    COLLIDED,
    EXPERT,
    NEGATIVE,
    REACHED,
    PlannerConfig,
    PlannerContext,
    follow_path,
    generate_expert,
    generate_negative,
    load_record,
    manifest_text,
    negative_window,
    obs_bytes,
    plan_path,
    replay_record,
    save_record,
)
from rvnsim.errors import DatasetGenerationError, RecordFormatError
from rvnsim.kinematics import MOVE_FORWARD, AgentSpec
from rvnsim.world import generate_scene, inflate

AGENT = AgentSpec()
CONFIG = PlannerConfig()


def corridor_scene(length_cells: int, width_cells: int, resolution: float = 0.05):
    rows = ["#" * (length_cells + 2)]
    rows += ["#" + "." * length_cells + "#"] * width_cells
    rows += ["#" * (length_cells + 2)]
    return grid_from_lines(rows, resolution)


# -- planning -----------------------------------------------------------------


def test_plan_path_straight_corridor_length():
    g = corridor_scene(120, 9, 0.05)  # 6 m free span
    start = (0.3, 0.275)
    goal = (5.3, 0.275)
    path = plan_path(g, start, goal, margin=0.0, d_min=4.0, d_max=8.0)
    assert path is not None
    assert path.length_m == pytest.approx(5.0, abs=g.resolution)
    assert np.allclose(path.waypoints[0], [0.325, 0.275])


def test_plan_path_rejects_start_equals_goal():
    g = corridor_scene(120, 9)
    p = (0.3, 0.275)
    assert plan_path(g, p, p, margin=0.0, d_min=4.0, d_max=8.0) is None
    assert plan_path(g, p, p, margin=0.0) is not None  # no band: length 0 ok


def test_plan_path_rejects_out_of_band():
    g = corridor_scene(120, 9)
    path = plan_path(g, (0.3, 0.275), (1.3, 0.275), margin=0.0, d_min=4.0, d_max=8.0)
    assert path is None


def test_plan_path_unreachable_returns_none():
    rows = ["#######",
            "#..#..#",
            "#..#..#",
            "#######"]
    g = grid_from_lines(rows, 0.1)
    assert plan_path(g, (0.15, 0.15), (0.55, 0.15), margin=0.0) is None


def test_plan_path_blocked_endpoint_returns_none():
    g = corridor_scene(40, 5)
    assert plan_path(g, (0.025, 0.025), (1.0, 0.15), margin=0.0) is None


def test_plan_path_costs_match_oracle_on_random_grids():
    from conftest import random_grid

    rng = np.random.default_rng(31)
    for _ in range(5):
        g = random_grid(rng, 32, 32, fill=0.3)
        free = np.argwhere(~g.cells)
        (sy, sx), (gy, gx) = free[rng.integers(len(free), size=2)]
        start = ((sx + 0.5) * g.resolution, (sy + 0.5) * g.resolution)
        goal = ((gx + 0.5) * g.resolution, (gy + 0.5) * g.resolution)
        path = plan_path(g, start, goal, margin=0.0)
        pairs = oracles.dijkstra_octile(g.cells.tolist(), (int(sx), int(sy)))
        want = pairs.get((int(gx), int(gy)))
        if want is None:
            assert path is None
        else:
            assert path.length_m == oracles.octile_to_meters(want, g.resolution)


# -- following ----------------------------------------------------------------


def test_follow_straight_corridor_all_forward():
    g = corridor_scene(160, 11)
    path = plan_path(g, (0.525, 0.3), (6.0, 0.3), margin=0.2)
    result = follow_path(g, AGENT, path, start_yaw=0.0)
    assert result.status == REACHED
    assert set(result.actions) == {MOVE_FORWARD}
    assert result.t_c is None


def test_follow_expert_margin_reaches_without_collisions():
    params = SMALL_SCENE
    reached = 0
    for seed in range(6):
        g = generate_scene(100 + seed, params)
        ctx = PlannerContext(g, CONFIG, AGENT)
        rec = generate_expert(g, CONFIG, AGENT, seed=seed, ctx=ctx)
        assert rec.kind == EXPERT
        reached += 1
    assert reached == 6


def test_follow_negative_margin_collides_in_pinch():
    # two 0.8 m rooms joined by a 0.3 m throat: the throat admits a path at
    # margin 0.1 but not the 0.18 robot body
    wide = "#" + "." * 30 + "#"
    throat = "#" * 14 + "." * 6 + "#" * 12
    rows = ["#" * 32] + [wide] * 16 + [throat] * 3 + [wide] * 16 + ["#" * 32]
    g = grid_from_lines(rows, 0.05)
    start = (0.875, 0.425)
    goal = (0.875, 1.375)
    path = plan_path(g, start, goal, margin=0.10)
    assert path is not None
    result = follow_path(g, AGENT, path, start_yaw=math.pi / 2)
    assert result.status == COLLIDED
    assert result.t_c is not None and result.t_c >= 1
    assert result.t_c == len(result.poses) - 1


# -- negative window ----------------------------------------------------------


def test_negative_window_formula():
    k_pre, k_post = 8, 6
    t_i, t_f = negative_window(20, 26, k_pre, k_post)
    assert (t_i, t_f) == (12, 26)
    assert t_f - t_i + 1 == 15
    t_i, t_f = negative_window(3, 9, k_pre, k_post)
    assert (t_i, t_f) == (0, 9)
    assert t_f - t_i + 1 == 10
    # short run clamps the tail
    assert negative_window(20, 23, k_pre, k_post) == (12, 23)


# -- record generation --------------------------------------------------------


@pytest.fixture(scope="module")
def dataset_scene():
    return generate_scene(160, SMALL_SCENE)


@pytest.fixture(scope="module")
def ctx(dataset_scene):
    return PlannerContext(dataset_scene, CONFIG, AGENT)


def test_expert_record_shape(dataset_scene, ctx):
    rec = generate_expert(dataset_scene, CONFIG, AGENT, seed=5, ctx=ctx)
    assert rec.kind == EXPERT
    assert rec.collision_index is None
    assert CONFIG.d_min <= rec.path_length_m <= CONFIG.d_max
    assert len(rec.frames) >= 2
    # last pose sits within the goal radius of the recovered goal
    gx, gy = rec.frames[-1].obs.goal_ego
    assert math.hypot(gx, gy) <= AGENT.goal_radius + dataset_scene.resolution


def test_expert_record_replays_clean(dataset_scene, ctx):
    rec = generate_expert(dataset_scene, CONFIG, AGENT, seed=6, ctx=ctx)
    assert replay_record(rec, dataset_scene, AGENT) == []


def test_negative_record_window_and_freeze(dataset_scene, ctx):
    rec = generate_negative(dataset_scene, CONFIG, AGENT, seed=7, ctx=ctx)
    assert rec.kind == NEGATIVE
    ci = rec.collision_index
    assert 1 <= ci <= CONFIG.k_pre
    assert len(rec.frames) == ci + CONFIG.k_post + 1
    collision = rec.frames[ci]
    for frame in rec.frames[ci + 1:]:
        assert (frame.x, frame.y, frame.yaw) == (collision.x, collision.y,
                                                 collision.yaw)
        assert frame.obs.packed_bytes() == collision.obs.packed_bytes()
    assert replay_record(rec, dataset_scene, AGENT) == []


def test_record_regeneration_is_byte_identical(dataset_scene, ctx):
    a = generate_expert(dataset_scene, CONFIG, AGENT, seed=9, ctx=ctx)
    b = generate_expert(dataset_scene, CONFIG, AGENT, seed=9, ctx=ctx)
    assert manifest_text(a) == manifest_text(b)
    assert obs_bytes(a) == obs_bytes(b)
    n1 = generate_negative(dataset_scene, CONFIG, AGENT, seed=10, ctx=ctx)
    n2 = generate_negative(dataset_scene, CONFIG, AGENT, seed=10, ctx=ctx)
    assert manifest_text(n1) == manifest_text(n2)
    assert obs_bytes(n1) == obs_bytes(n2)


def test_manifest_poses_have_nine_decimals(dataset_scene, ctx):
    rec = generate_expert(dataset_scene, CONFIG, AGENT, seed=11, ctx=ctx)
    doc = json.loads(manifest_text(rec))
    assert doc["kind"] == "expert"
    assert doc["collision_index"] is None
    first = manifest_text(rec).split('"poses":[[')[1].split("]")[0]
    for token in first.split(","):
        assert len(token.split(".")[1]) == 9


def test_save_load_roundtrip(tmp_path, dataset_scene, ctx):
    rec = generate_negative(dataset_scene, CONFIG, AGENT, seed=12, ctx=ctx)
    out = save_record(rec, tmp_path)
    assert out == tmp_path / dataset_scene.scene_id / "12"
    back = load_record(out)
    assert back.kind == rec.kind
    assert back.collision_index == rec.collision_index
    assert len(back.frames) == len(rec.frames)
    assert obs_bytes(back) == obs_bytes(rec)
    assert manifest_text(back) == manifest_text(rec)


def test_load_record_rejects_bad_magic(tmp_path, dataset_scene, ctx):
    rec = generate_expert(dataset_scene, CONFIG, AGENT, seed=13, ctx=ctx)
    out = save_record(rec, tmp_path)
    raw = (out / "obs.bin").read_bytes()
    (out / "obs.bin").write_bytes(b"BADMAGIC" + raw[8:])
    with pytest.raises(RecordFormatError):
        load_record(out)


def test_load_record_rejects_frame_count_mismatch(tmp_path, dataset_scene, ctx):
    rec = generate_expert(dataset_scene, CONFIG, AGENT, seed=14, ctx=ctx)
    out = save_record(rec, tmp_path)
    raw = (out / "obs.bin").read_bytes()
    (out / "obs.bin").write_bytes(raw[:-4])
    with pytest.raises(RecordFormatError):
        load_record(out)


def test_replay_flags_pose_tampered_into_wall(tmp_path, dataset_scene, ctx):
    rec = generate_expert(dataset_scene, CONFIG, AGENT, seed=15, ctx=ctx)
    out = save_record(rec, tmp_path)
    doc = json.loads((out / "manifest.json").read_text())
    nav = inflate(dataset_scene, AGENT.r_robot)
    k = len(doc["poses"]) // 2
    x, y, yaw = doc["poses"][k]
    step = dataset_scene.resolution
    for _ in range(200):  # push the pose until it sits in a blocked cell
        x += step
        if nav.blocked_at(x, y):
            break
    doc["poses"][k] = [x, y, yaw]
    (out / "manifest.json").write_text(json.dumps(doc))
    tampered = load_record(out)
    assert replay_record(tampered, dataset_scene, AGENT) != []


def test_replay_flags_unfrozen_observation(dataset_scene, ctx):
    rec = generate_negative(dataset_scene, CONFIG, AGENT, seed=16, ctx=ctx)
    frames = list(rec.frames)
    last = frames[-1]
    depths = last.obs.depths.copy()
    depths[0] += np.float32(0.5)
    from rvnsim.sensing import ObservationFrame
    from rvnsim.datagen import TrajectoryFrame, TrajectoryRecord

    frames[-1] = TrajectoryFrame(last.x, last.y, last.yaw,
                                 ObservationFrame(depths, last.obs.goal_ego))
    bad = TrajectoryRecord(rec.scene_id, rec.kind, frames, rec.collision_index,
                           rec.seed, rec.path_length_m, rec.k_pre, rec.k_post)
    problems = replay_record(bad, dataset_scene, AGENT)
    assert any("not frozen" in p for p in problems)


def test_planner_config_margin_validation():
    with pytest.raises(ValueError):
        PlannerConfig(margin_expert=0.1).validate_against(AGENT)
    with pytest.raises(ValueError):
        PlannerConfig(margin_negative=0.2).validate_against(AGENT)


def test_generation_exhaustion_raises():
    # a 2 m room never admits a path in the [4, 8] m band
    g = corridor_scene(40, 30, 0.05)
    with pytest.raises(DatasetGenerationError):
        generate_expert(g, CONFIG, AGENT, seed=1)
    with pytest.raises(DatasetGenerationError):
        generate_negative(g, CONFIG, AGENT, seed=1)
