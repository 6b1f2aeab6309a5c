"""Occupancy-grid worlds.

Scene representation and the geometry kernels everything else builds on:

* ``OccupancyGrid``     -- binary obstacle raster with metric resolution
* RVNMAP text format    -- bit-exact save/load of grids
* ``generate_scene``    -- seeded procedural indoor floorplans
* ``inflate``           -- configuration-space obstacle inflation
* ``geodesic_field``    -- exact 8-connected shortest-path distances
* ``sample_navigable_point`` -- uniform sampling on the main free component

Geodesic distances use unit axis steps and sqrt(2) diagonal steps.  To keep
path costs exactly reproducible (and comparable against independent solvers),
shortest paths are computed over integer keys ``a*Q + b*P`` where ``P/Q`` is a
Pell-equation convergent of sqrt(2); the integer step counts ``(a, b)`` are
recovered from the optimal key and converted to meters in one canonical place
(:func:`octile_meters`).  For every path short enough to fit on a supported
grid the integer key ordering agrees exactly with the real ``a + b*sqrt(2)``
ordering, so results are exact shortest-path costs, not approximations.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from io import StringIO
from typing import IO

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .errors import (
    EmptyWorldError,
    InvalidSourceError,
    MapFormatError,
    SceneGenerationError,
)

SQRT2 = math.sqrt(2.0)

# Points lying exactly on a cell edge belong to the higher-index cell; the
# epsilon absorbs float noise so world->cell indexing is stable under the
# 9-decimal pose rounding used by the dataset format.
BOUNDARY_EPS = 1e-9

# Pell convergent P/Q of sqrt(2) (P^2 - 2*Q^2 = 1).  Integer edge keys
# a*KEY_AXIS + b*KEY_DIAG order path costs exactly for diagonal counts up to
# ~0.7*Q, i.e. any path on grids of a few million cells.
KEY_DIAG = 3880899
KEY_AXIS = 2744210
assert KEY_DIAG * KEY_DIAG - 2 * KEY_AXIS * KEY_AXIS == 1

_8CONN = np.ones((3, 3), dtype=bool)


def octile_meters(axis_steps, diag_steps, resolution: float):
    """Canonical conversion of (axis, diagonal) step counts to meters."""
    return resolution * (np.asarray(axis_steps, dtype=np.float64)
                         + np.asarray(diag_steps, dtype=np.float64) * SQRT2)


def keys_to_meters(keys, resolution: float):
    """Decode integer path keys back to exact octile meters.

    ``keys`` may be a scalar or array of integers ``a*KEY_AXIS + b*KEY_DIAG``.
    Because P*P == 1 (mod Q), the diagonal count is ``(key % Q) * (P % Q) % Q``.
    """
    k = np.asarray(keys, dtype=np.int64)
    pinv = KEY_DIAG % KEY_AXIS
    b = ((k % KEY_AXIS) * pinv) % KEY_AXIS
    a = (k - b * KEY_DIAG) // KEY_AXIS
    return octile_meters(a, b, resolution)


def point_to_cell(x: float, y: float, resolution: float) -> tuple[int, int]:
    """World point -> (ix, iy) cell indices under the boundary convention."""
    return (int(math.floor((x + BOUNDARY_EPS) / resolution)),
            int(math.floor((y + BOUNDARY_EPS) / resolution)))


def points_to_cells(points: np.ndarray, resolution: float) -> np.ndarray:
    """Vectorized :func:`point_to_cell` for an (..., 2) array of points."""
    return np.floor((points + BOUNDARY_EPS) / resolution).astype(np.int64)


def cell_center(ix: int, iy: int, resolution: float) -> tuple[float, float]:
    return ((ix + 0.5) * resolution, (iy + 0.5) * resolution)


class _Raster:
    """Shared indexing helpers over a blocked-cell raster."""

    cells: np.ndarray  # bool, shape (height, width), True = blocked
    resolution: float

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def extent(self) -> tuple[float, float]:
        """World extent in meters (x, y)."""
        return (self.width * self.resolution, self.height * self.resolution)

    def in_bounds_cell(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def blocked_at_cell(self, ix: int, iy: int) -> bool:
        if not self.in_bounds_cell(ix, iy):
            return True
        return bool(self.cells[iy, ix])

    def blocked_at(self, x: float, y: float) -> bool:
        ix, iy = point_to_cell(x, y, self.resolution)
        return self.blocked_at_cell(ix, iy)

    def blocked_at_points(self, points: np.ndarray) -> np.ndarray:
        """Blocked flags for an (N, 2) array of world points (OOB = blocked)."""
        idx = points_to_cells(points, self.resolution)
        ix, iy = idx[..., 0], idx[..., 1]
        oob = (ix < 0) | (ix >= self.width) | (iy < 0) | (iy >= self.height)
        ixc = np.clip(ix, 0, self.width - 1)
        iyc = np.clip(iy, 0, self.height - 1)
        return self.cells[iyc, ixc] | oob

    def free_cell_count(self) -> int:
        return int(np.size(self.cells) - np.count_nonzero(self.cells))


class OccupancyGrid(_Raster):
    """Binary obstacle/free raster with metric resolution.

    ``cells[iy, ix]`` is True where cell (ix, iy) is an obstacle.  Cell
    (ix, iy) covers the world square [ix*res, (ix+1)*res) x [iy*res, ...).
    Worlds are closed: every border cell is an obstacle.  Instances are
    immutable after construction and safe to share across threads.
    """

    def __init__(self, cells: np.ndarray, resolution: float, scene_id: str = ""):
        cells = np.array(cells, dtype=bool)
        if cells.ndim != 2:
            raise ValueError("cells must be a 2D raster")
        h, w = cells.shape
        if w < 3 or h < 3:
            raise ValueError("grid must be at least 3x3 to have a closed border")
        if not (0.0 < resolution <= 1.0):
            raise ValueError("resolution must be in (0, 1] meters")
        border = np.concatenate([cells[0, :], cells[-1, :], cells[:, 0], cells[:, -1]])
        if not border.all():
            raise ValueError("border cells must all be obstacles (closed world)")
        self.cells = cells
        self.cells.setflags(write=False)
        self.resolution = float(resolution)
        self.scene_id = scene_id


class InflatedGrid(_Raster):
    """Configuration-space view of a grid: obstacles grown by ``margin``.

    A cell is blocked iff its center lies within Euclidean distance ``margin``
    of any obstacle cell's region.  Lazily caches the free-cell graph and the
    largest-connected-component mask; caches are thread safe.
    """

    def __init__(self, base: OccupancyGrid, margin: float, cells: np.ndarray):
        self.base = base
        self.margin = float(margin)
        self.cells = cells
        self.cells.setflags(write=False)
        self._lock = threading.Lock()
        self._graph: csr_matrix | None = None
        self._component_cells: np.ndarray | None = None

    @property
    def resolution(self) -> float:
        return self.base.resolution

    def _free_graph(self) -> csr_matrix:
        with self._lock:
            if self._graph is None:
                self._graph = _build_free_graph(self.cells)
            return self._graph

    def largest_component_cells(self) -> np.ndarray:
        """Flat indices (row-major) of the largest free connected component."""
        with self._lock:
            if self._component_cells is None:
                self._component_cells = _largest_component_flat(self.cells)
            return self._component_cells


def inflate(grid: OccupancyGrid, margin: float) -> InflatedGrid:
    """Grow obstacles by ``margin`` meters (exact Euclidean thresholding).

    margin = 0 reproduces the base obstacle raster.  Inflation is monotone:
    a larger margin blocks a superset of cells.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    res = grid.resolution
    w, h = grid.width, grid.height
    if margin >= res * math.hypot(w, h):
        # Border obstacles exist, so every cell center is within the world
        # diagonal of some obstacle region: saturate.
        return InflatedGrid(grid, margin, np.ones_like(grid.cells))
    reach = min(int(margin / res + 0.5) + 2, max(w, h))
    offs = np.arange(-reach, reach + 1)
    dj, di = np.meshgrid(offs, offs, indexing="ij")
    fx = np.maximum(np.abs(di) - 0.5, 0.0) * res
    fy = np.maximum(np.abs(dj) - 0.5, 0.0) * res
    selem = np.hypot(fx, fy) <= margin
    blocked = ndimage.binary_dilation(grid.cells, structure=selem)
    return InflatedGrid(grid, margin, blocked)


def _largest_component_flat(blocked: np.ndarray) -> np.ndarray:
    free = ~blocked
    if not free.any():
        raise EmptyWorldError("grid has no free cells")
    labels, n = ndimage.label(free, structure=_8CONN)
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    keep = int(np.argmax(counts))
    return np.flatnonzero(labels.ravel() == keep)


def _build_free_graph(blocked: np.ndarray) -> csr_matrix:
    """8-connected free-cell graph with integer edge keys as float64 weights."""
    h, w = blocked.shape
    free = ~blocked
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    rows, cols, data = [], [], []

    def _add(mask, a, b, weight):
        rows.append(a[mask])
        cols.append(b[mask])
        data.append(np.full(int(np.count_nonzero(mask)), float(weight)))

    _add(free[:, :-1] & free[:, 1:], idx[:, :-1], idx[:, 1:], KEY_AXIS)
    _add(free[:-1, :] & free[1:, :], idx[:-1, :], idx[1:, :], KEY_AXIS)
    _add(free[:-1, :-1] & free[1:, 1:], idx[:-1, :-1], idx[1:, 1:], KEY_DIAG)
    _add(free[:-1, 1:] & free[1:, :-1], idx[:-1, 1:], idx[1:, :-1], KEY_DIAG)
    r = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    d = np.concatenate(data) if data else np.zeros(0)
    return csr_matrix((d, (r, c)), shape=(h * w, h * w))


class DistanceField:
    """Exact geodesic distances (meters) from one source over free cells.

    Unreachable or blocked cells carry ``inf``.
    """

    def __init__(self, grid: InflatedGrid, source: tuple[float, float],
                 distances: np.ndarray):
        self.grid = grid
        self.source = source
        self.distances = distances
        self.distances.setflags(write=False)

    def at_cell(self, ix: int, iy: int) -> float:
        if not self.grid.in_bounds_cell(ix, iy):
            return math.inf
        return float(self.distances[iy, ix])

    def at(self, x: float, y: float) -> float:
        ix, iy = point_to_cell(x, y, self.grid.resolution)
        return self.at_cell(ix, iy)

    def cells_in_band(self, d_min: float, d_max: float) -> np.ndarray:
        """Flat indices of cells whose distance lies in [d_min, d_max]."""
        flat = self.distances.ravel()
        return np.flatnonzero((flat >= d_min) & (flat <= d_max))


def geodesic_field(grid: InflatedGrid, source: tuple[float, float]) -> DistanceField:
    """Shortest-path distances on the 8-connected free-cell graph.

    Edge costs are ``resolution`` (axis) and ``resolution*sqrt(2)`` (diagonal).
    """
    res = grid.resolution
    sx, sy = point_to_cell(source[0], source[1], res)
    if grid.blocked_at_cell(sx, sy):
        raise InvalidSourceError(f"source {source} lies in a blocked cell")
    graph = grid._free_graph()
    keys = _csgraph_dijkstra(graph, directed=False,
                             indices=sy * grid.width + sx)
    dist = np.full(keys.shape, np.inf)
    finite = np.isfinite(keys)
    dist[finite] = keys_to_meters(np.rint(keys[finite]).astype(np.int64), res)
    return DistanceField(grid, (float(source[0]), float(source[1])),
                         dist.reshape(grid.height, grid.width))


def sample_navigable_point(grid: InflatedGrid, rng: np.random.Generator) -> tuple[float, float]:
    """Uniform random free-cell center from the largest free component."""
    cells = grid.largest_component_cells()
    flat = int(cells[rng.integers(len(cells))])
    iy, ix = divmod(flat, grid.width)
    return cell_center(ix, iy, grid.resolution)


# ---------------------------------------------------------------------------
# RVNMAP text format
# ---------------------------------------------------------------------------
#
#   line 1:            RVNMAP v1 <width> <height> <resolution_m>
#   lines 2..height+1: rows of '#' (obstacle) / '.' (free), row 2 = minimal-y
#
# Resolution is printed with exactly six decimal digits, newlines are LF, and
# every line (including the last row) is LF-terminated with no trailing
# whitespace, so save -> load -> save is the identity on valid content.

_GLYPHS = {"#": True, ".": False}


def save_scene(grid: OccupancyGrid) -> str:
    """Serialize a grid to canonical RVNMAP text."""
    res_text = f"{grid.resolution:.6f}"
    if float(res_text) != grid.resolution:
        raise MapFormatError(
            f"resolution {grid.resolution!r} is not representable with 6 decimals")
    out = StringIO()
    out.write(f"RVNMAP v1 {grid.width} {grid.height} {res_text}\n")
    for iy in range(grid.height):
        out.write("".join("#" if b else "." for b in grid.cells[iy]))
        out.write("\n")
    return out.getvalue()


def load_scene(source: str | bytes | IO, scene_id: str = "") -> OccupancyGrid:
    """Parse RVNMAP content (text, bytes, or a file-like object)."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MapFormatError(f"not valid UTF-8: {exc}") from exc
    if not source.endswith("\n"):
        raise MapFormatError("content must end with a newline")
    lines = source.split("\n")[:-1]
    if not lines:
        raise MapFormatError("line 1: missing header")
    parts = lines[0].split(" ")
    if len(parts) != 5 or parts[0] != "RVNMAP" or parts[1] != "v1":
        raise MapFormatError(f"line 1: bad header {lines[0]!r}")
    try:
        width, height = int(parts[2]), int(parts[3])
    except ValueError as exc:
        raise MapFormatError(f"line 1: bad dimensions {lines[0]!r}") from exc
    res_text = parts[4]
    head, _, frac = res_text.partition(".")
    if not head.isdigit() or len(frac) != 6 or not frac.isdigit():
        raise MapFormatError(f"line 1: resolution must have 6 decimals, got {res_text!r}")
    resolution = float(res_text)
    if len(lines) - 1 != height:
        raise MapFormatError(
            f"expected {height} rows, found {len(lines) - 1}")
    cells = np.zeros((height, width), dtype=bool)
    for iy, row in enumerate(lines[1:]):
        lineno = iy + 2
        if len(row) != width:
            raise MapFormatError(
                f"line {lineno}: row length {len(row)} != width {width}")
        for ix, ch in enumerate(row):
            if ch not in _GLYPHS:
                raise MapFormatError(f"line {lineno}: unknown glyph {ch!r}")
            cells[iy, ix] = _GLYPHS[ch]
    try:
        return OccupancyGrid(cells, resolution, scene_id=scene_id)
    except ValueError as exc:
        raise MapFormatError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Procedural scene generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SceneParams:
    """Knobs for the seeded indoor floorplan generator.

    A drawn room count of zero produces the degenerate empty bordered
    rectangle.  ``furniture_clearance`` keeps every furniture blob that far
    from all previously placed obstacles, which preserves connectivity of the
    free space under configuration-space inflation up to roughly half that
    clearance.
    """

    width_m: float = 20.0
    height_m: float = 20.0
    resolution: float = 0.05
    room_count: tuple[int, int] = (5, 9)
    room_size_m: tuple[float, float] = (3.0, 6.5)
    corridor_width_m: tuple[float, float] = (1.2, 2.0)
    furniture_density: float = 0.04  # blobs per square meter of carved space
    furniture_size_m: tuple[float, float] = (0.3, 1.1)
    furniture_clearance_m: float = 0.7
    min_component_cells: int = 100
    min_component_fraction: float = 0.6
    max_attempts: int = 33  # first try + 32 perturbed retries


def scene_id_for_seed(seed: int) -> str:
    return f"scene_{seed:08d}"


def generate_scene(seed: int, params: SceneParams = SceneParams()) -> OccupancyGrid:
    """Deterministic indoor-like world: rooms joined by corridors plus clutter.

    Raises :class:`SceneGenerationError` when every attempt yields a world
    whose largest free component is below the configured floor.
    """
    w = int(round(params.width_m / params.resolution))
    h = int(round(params.height_m / params.resolution))
    if w < 8 or h < 8:
        raise SceneGenerationError("world extent must be at least 8x8 cells")
    for attempt in range(params.max_attempts):
        rng = np.random.default_rng([int(seed), attempt])
        cells = _build_layout(rng, w, h, params)
        free = int(cells.size - np.count_nonzero(cells))
        if free == 0:
            continue
        labels, _ = ndimage.label(~cells, structure=_8CONN)
        counts = np.bincount(labels.ravel())
        counts[0] = 0
        largest = int(counts.max())
        if largest >= params.min_component_cells and \
                largest >= params.min_component_fraction * free:
            return OccupancyGrid(cells, params.resolution,
                                 scene_id=scene_id_for_seed(seed))
    raise SceneGenerationError(
        f"no usable world for seed {seed} after {params.max_attempts} attempts")


def _build_layout(rng: np.random.Generator, w: int, h: int,
                  params: SceneParams) -> np.ndarray:
    res = params.resolution
    cells = np.ones((h, w), dtype=bool)
    lo, hi = params.room_count
    n_rooms = int(rng.integers(lo, hi + 1)) if hi > lo else int(lo)

    if n_rooms == 0:
        cells[1:-1, 1:-1] = False
    else:
        centers = []
        for _ in range(n_rooms):
            rw = max(3, int(round(rng.uniform(*params.room_size_m) / res)))
            rh = max(3, int(round(rng.uniform(*params.room_size_m) / res)))
            rw, rh = min(rw, w - 2), min(rh, h - 2)
            x0 = int(rng.integers(1, max(2, w - 1 - rw)))
            y0 = int(rng.integers(1, max(2, h - 1 - rh)))
            cells[y0:y0 + rh, x0:x0 + rw] = False
            centers.append((x0 + rw // 2, y0 + rh // 2))
        order = rng.permutation(len(centers))
        for a, b in zip(order[:-1], order[1:]):
            cw = max(2, int(round(rng.uniform(*params.corridor_width_m) / res)))
            _carve_corridor(cells, centers[a], centers[b], cw,
                            bool(rng.integers(2)))

    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True

    if params.furniture_density > 0:
        free_area = (cells.size - np.count_nonzero(cells)) * res * res
        n_blobs = int(round(params.furniture_density * free_area))
        clear = int(math.ceil(params.furniture_clearance_m / res))
        for _ in range(n_blobs):
            _place_furniture(rng, cells, params, clear)
    return cells


def _carve_corridor(cells: np.ndarray, a: tuple[int, int], b: tuple[int, int],
                    width: int, x_first: bool) -> None:
    half = width // 2
    (ax, ay), (bx, by) = a, b
    h, w = cells.shape

    def _band(x0, x1, y0, y1):
        x0, x1 = max(1, min(x0, x1) - half), min(w - 1, max(x0, x1) + half + 1)
        y0, y1 = max(1, min(y0, y1) - half), min(h - 1, max(y0, y1) + half + 1)
        cells[y0:y1, x0:x1] = False

    if x_first:
        _band(ax, bx, ay, ay)
        _band(bx, bx, ay, by)
    else:
        _band(ax, ax, ay, by)
        _band(ax, bx, by, by)


def _place_furniture(rng: np.random.Generator, cells: np.ndarray,
                     params: SceneParams, clear: int) -> None:
    res = params.resolution
    h, w = cells.shape
    for _ in range(20):
        size = rng.uniform(*params.furniture_size_m)
        r = max(1, int(round(size / (2 * res))))
        if 1 + r + clear >= min(w, h) - 1 - r - clear:
            return  # world too small for this blob plus clearance
        cx = int(rng.integers(1 + r + clear, w - 1 - r - clear))
        cy = int(rng.integers(1 + r + clear, h - 1 - r - clear))
        y0, y1 = cy - r - clear, cy + r + clear + 1
        x0, x1 = cx - r - clear, cx + r + clear + 1
        if cells[y0:y1, x0:x1].any():
            continue  # would crowd an existing obstacle
        if rng.integers(2) == 0:
            cells[cy - r:cy + r + 1, cx - r:cx + r + 1] = True
        else:
            yy, xx = np.ogrid[-r:r + 1, -r:r + 1]
            disc = xx * xx + yy * yy <= r * r
            cells[cy - r:cy + r + 1, cx - r:cx + r + 1] |= disc
        return
