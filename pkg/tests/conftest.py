from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from rvnsim.world import OccupancyGrid, SceneParams, generate_scene, load_scene


def grid_from_lines(lines: list[str], resolution: float = 0.05,
                    scene_id: str = "test") -> OccupancyGrid:
    """Hand-built map helper; row 0 of ``lines`` is the minimal-y row."""
    width = len(lines[0])
    header = f"RVNMAP v1 {width} {len(lines)} {resolution:.6f}\n"
    return load_scene(header + "\n".join(lines) + "\n", scene_id=scene_id)


def open_room(width_cells: int, height_cells: int,
              resolution: float = 0.05) -> OccupancyGrid:
    """Bordered rectangle with an empty interior."""
    rows = ["#" * width_cells]
    rows += ["#" + "." * (width_cells - 2) + "#"] * (height_cells - 2)
    rows += ["#" * width_cells]
    return grid_from_lines(rows, resolution)


def random_grid(rng: np.random.Generator, width: int = 32, height: int = 32,
                fill: float = 0.25, resolution: float = 0.05) -> OccupancyGrid:
    """Random raster with closed borders; not necessarily connected."""
    cells = rng.random((height, width)) < fill
    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True
    return OccupancyGrid(cells, resolution, scene_id="random")


SMALL_SCENE = SceneParams(width_m=12.0, height_m=12.0)


@pytest.fixture(scope="session")
def scene7() -> OccupancyGrid:
    return generate_scene(7)


@pytest.fixture(scope="session")
def small_scene() -> OccupancyGrid:
    return generate_scene(42, SMALL_SCENE)
