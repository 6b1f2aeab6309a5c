from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from conftest import grid_from_lines, open_room, random_grid
from rvnsim.errors import (
    EmptyWorldError,
    InvalidSourceError,
    MapFormatError,
    SceneGenerationError,
)
from rvnsim.world import (
    OccupancyGrid,
    SceneParams,
    generate_scene,
    geodesic_field,
    inflate,
    load_scene,
    octile_meters,
    point_to_cell,
    sample_navigable_point,
    save_scene,
)

# -- scene generation ---------------------------------------------------------


def test_generate_scene_is_deterministic():
    a = generate_scene(7)
    b = generate_scene(7)
    assert np.array_equal(a.cells, b.cells)
    assert a.scene_id == b.scene_id == "scene_00000007"


def test_generate_scene_seed_changes_raster():
    a = generate_scene(7)
    b = generate_scene(8)
    assert not np.array_equal(a.cells, b.cells)


def test_generate_scene_degenerate_empty_rectangle():
    params = SceneParams(width_m=2.0, height_m=1.5, room_count=(0, 0),
                         furniture_density=0.0)
    g = generate_scene(3, params)
    assert g.free_cell_count() == (g.width - 2) * (g.height - 2)


def test_generate_scene_largest_component_share():
    from scipy import ndimage

    for seed in (1, 2, 3):
        g = generate_scene(seed)
        labels, _ = ndimage.label(~g.cells, structure=np.ones((3, 3)))
        counts = np.bincount(labels.ravel())
        counts[0] = 0
        assert counts.max() >= 0.6 * g.free_cell_count()


def test_generate_scene_rejects_degenerate_extent():
    with pytest.raises(SceneGenerationError):
        generate_scene(1, SceneParams(width_m=0.3, height_m=0.3))


# -- RVNMAP -------------------------------------------------------------------

MINI = "RVNMAP v1 3 3 0.050000\n###\n#.#\n###\n"


def test_load_scene_minimal_map():
    g = load_scene(MINI)
    assert (g.width, g.height) == (3, 3)
    assert g.free_cell_count() == 1
    assert not g.blocked_at_cell(1, 1)


def test_rvnmap_roundtrip_identity():
    assert save_scene(load_scene(MINI)) == MINI
    g = generate_scene(5, SceneParams(width_m=3.0, height_m=2.0))
    text = save_scene(g)
    assert save_scene(load_scene(text)) == text


def test_load_scene_accepts_bytes_and_streams(tmp_path):
    from io import BytesIO

    assert load_scene(MINI.encode()).free_cell_count() == 1
    assert load_scene(BytesIO(MINI.encode())).free_cell_count() == 1


def test_load_scene_row_length_mismatch_reports_line():
    bad = "RVNMAP v1 5 3 0.050000\n#####\n#..#\n#####\n"
    with pytest.raises(MapFormatError, match="line 3"):
        load_scene(bad)


def test_load_scene_unknown_glyph_reports_line():
    bad = "RVNMAP v1 3 3 0.050000\n###\n#x#\n###\n"
    with pytest.raises(MapFormatError, match="line 3"):
        load_scene(bad)


def test_load_scene_header_errors():
    with pytest.raises(MapFormatError, match="line 1"):
        load_scene("RVNMAP v2 3 3 0.050000\n###\n###\n###\n")
    with pytest.raises(MapFormatError, match="6 decimals"):
        load_scene("RVNMAP v1 3 3 0.05\n###\n#.#\n###\n")
    with pytest.raises(MapFormatError, match="newline"):
        load_scene(MINI[:-1])
    with pytest.raises(MapFormatError, match="rows"):
        load_scene("RVNMAP v1 3 4 0.050000\n###\n#.#\n###\n")


def test_open_border_rejected():
    with pytest.raises(MapFormatError, match="border"):
        load_scene("RVNMAP v1 3 3 0.050000\n###\n#..\n###\n")
    with pytest.raises(ValueError, match="border"):
        OccupancyGrid(np.zeros((4, 4), dtype=bool), 0.05)


def test_grid_invariants():
    with pytest.raises(ValueError):
        OccupancyGrid(np.ones((2, 8), dtype=bool), 0.05)
    with pytest.raises(ValueError):
        OccupancyGrid(np.ones((8, 8), dtype=bool), 1.5)


# -- inflation ----------------------------------------------------------------


def test_inflate_zero_margin_is_identity(small_scene):
    nav = inflate(small_scene, 0.0)
    assert np.array_equal(nav.cells, small_scene.cells)


def test_inflate_negative_margin_rejected(small_scene):
    with pytest.raises(ValueError):
        inflate(small_scene, -0.1)


def test_inflate_single_obstacle_disc():
    rows = ["#" * 17] + ["#" + "." * 15 + "#"] * 15 + ["#" * 17]
    rows[8] = "#" + "." * 7 + "#" + "." * 7 + "#"
    g = grid_from_lines(rows, resolution=0.05)
    nav = inflate(g, 2 * g.resolution)
    expected = oracles.inflate_brute_force(g.cells.tolist(), g.resolution,
                                           2 * g.resolution)
    assert np.array_equal(nav.cells, np.array(expected))
    # the lone interior obstacle grows into a rounded disc, not a square
    assert nav.blocked_at_cell(8 + 2, 8) and nav.blocked_at_cell(8 + 2, 8 + 1)
    assert not nav.blocked_at_cell(8 + 2, 8 + 2)
    assert not nav.blocked_at_cell(8 + 3, 8)


def test_inflate_saturates_beyond_world_diagonal():
    g = open_room(12, 10)
    nav = inflate(g, g.resolution * math.hypot(12, 10) + 0.01)
    assert nav.cells.all()


def test_inflate_matches_brute_force_on_random_grids():
    rng = np.random.default_rng(11)
    for _ in range(6):
        g = random_grid(rng, 16, 14, fill=0.2)
        margin = float(rng.uniform(0.0, 0.3))
        nav = inflate(g, margin)
        expected = oracles.inflate_brute_force(g.cells.tolist(), g.resolution, margin)
        assert np.array_equal(nav.cells, np.array(expected))


def test_inflate_monotone_and_nested():
    rng = np.random.default_rng(12)
    for _ in range(4):
        g = random_grid(rng, 20, 20, fill=0.15)
        margins = sorted(rng.uniform(0.0, 0.4, size=3))
        navs = [inflate(g, m) for m in margins]
        assert (g.cells <= navs[0].cells).all()
        for small, big in zip(navs, navs[1:]):
            assert (small.cells <= big.cells).all()


# -- geodesic fields ----------------------------------------------------------


def test_geodesic_zero_at_source(small_scene):
    nav = inflate(small_scene, 0.18)
    rng = np.random.default_rng(0)
    p = sample_navigable_point(nav, rng)
    field = geodesic_field(nav, p)
    assert field.at(*p) == 0.0


def test_geodesic_straight_run_in_empty_grid():
    g = open_room(100, 100, resolution=0.1)
    nav = inflate(g, 0.0)
    field = geodesic_field(nav, (0.55, 0.55))
    assert field.at(0.55, 1.45) == pytest.approx(0.9, abs=1e-12)


def test_geodesic_wall_disconnects():
    rows = ["#######",
            "#..#..#",
            "#..#..#",
            "#..#..#",
            "#######"]
    g = grid_from_lines(rows, resolution=0.1)
    nav = inflate(g, 0.0)
    field = geodesic_field(nav, (0.15, 0.15))
    assert math.isinf(field.at(0.55, 0.15))


def test_geodesic_source_in_blocked_cell_raises():
    g = open_room(10, 10)
    nav = inflate(g, 0.0)
    with pytest.raises(InvalidSourceError):
        geodesic_field(nav, (0.025, 0.025))


def test_geodesic_matches_brute_force_dijkstra():
    rng = np.random.default_rng(21)
    for _ in range(5):
        g = random_grid(rng, 32, 32, fill=0.3)
        free = np.argwhere(~g.cells)
        iy, ix = free[rng.integers(len(free))]
        source = ((ix + 0.5) * g.resolution, (iy + 0.5) * g.resolution)
        nav = inflate(g, 0.0)
        field = geodesic_field(nav, source)
        expected = oracles.dijkstra_octile(g.cells.tolist(), (int(ix), int(iy)))
        for jy in range(g.height):
            for jx in range(g.width):
                got = field.at_cell(jx, jy)
                pair = expected.get((jx, jy))
                if pair is None:
                    assert math.isinf(got)
                else:
                    assert got == oracles.octile_to_meters(pair, g.resolution)


def test_geodesic_triangle_consistency(small_scene):
    nav = inflate(small_scene, 0.18)
    rng = np.random.default_rng(2)
    field = geodesic_field(nav, sample_navigable_point(nav, rng))
    d = field.distances
    res = small_scene.resolution
    finite = np.isfinite(d)
    for (dy, dx), cost in (((0, 1), res), ((1, 0), res), ((1, 1), res * oracles.SQRT2)):
        a = d[dy or None:, dx or None:]
        b = d[: -dy or None, : -dx or None]
        both = finite[dy or None:, dx or None:] & finite[: -dy or None, : -dx or None]
        assert (np.abs(a[both] - b[both]) <= cost + 1e-9).all()


def test_geodesic_at_least_euclidean(small_scene):
    nav = inflate(small_scene, 0.18)
    rng = np.random.default_rng(3)
    src = sample_navigable_point(nav, rng)
    field = geodesic_field(nav, src)
    ys, xs = np.nonzero(np.isfinite(field.distances))
    cx = (xs + 0.5) * small_scene.resolution
    cy = (ys + 0.5) * small_scene.resolution
    euclid = np.hypot(cx - src[0], cy - src[1])
    assert (field.distances[ys, xs] >= euclid - 1e-9).all()


# -- navigable point sampling -------------------------------------------------


def test_sample_single_free_cell_returns_center():
    g = load_scene(MINI)
    nav = inflate(g, 0.0)
    p = sample_navigable_point(nav, np.random.default_rng(0))
    assert p == pytest.approx((0.075, 0.075))


def test_samples_always_in_free_cells():
    rows = ["#" * 20] + ["#" + "." * 9 + "#" * 10] * 18 + ["#" * 20]
    g = grid_from_lines(rows, resolution=0.1)
    nav = inflate(g, 0.0)
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        x, y = sample_navigable_point(nav, rng)
        assert not nav.blocked_at(x, y)


def test_sampling_is_deterministic(small_scene):
    nav = inflate(small_scene, 0.18)
    seq1 = [sample_navigable_point(nav, np.random.default_rng(9)) for _ in range(1)]
    a = np.random.default_rng(9)
    b = np.random.default_rng(9)
    seq1 = [sample_navigable_point(nav, a) for _ in range(50)]
    seq2 = [sample_navigable_point(nav, b) for _ in range(50)]
    assert seq1 == seq2


def test_sampling_empty_world_raises():
    g = OccupancyGrid(np.ones((8, 8), dtype=bool), 0.05)
    nav = inflate(g, 0.0)
    with pytest.raises(EmptyWorldError):
        sample_navigable_point(nav, np.random.default_rng(0))


def test_sampling_restricted_to_largest_component():
    rows = ["#######",
            "#.#...#",
            "#.#...#",
            "#######"]
    g = grid_from_lines(rows, resolution=0.1)
    nav = inflate(g, 0.0)
    rng = np.random.default_rng(1)
    for _ in range(200):
        x, _ = sample_navigable_point(nav, rng)
        assert x > 0.2  # never the 2-cell pocket on the left


# -- misc helpers -------------------------------------------------------------


def test_point_to_cell_boundary_convention():
    assert point_to_cell(0.1, 0.0, 0.05) == (2, 0)  # exact edge -> upper cell
    assert point_to_cell(0.0999999, 0.0, 0.05) == (1, 0)


def test_octile_meters_formula():
    assert octile_meters(3, 2, 0.5) == pytest.approx(0.5 * (3 + 2 * math.sqrt(2)))
