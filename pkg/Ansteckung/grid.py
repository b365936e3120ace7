"""
Space-time grid of the endemic component: contiguous time intervals crossed with
polygonal tiles, carrying the offset table and gridded covariates.

Interval and tile indices are 0-based.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from Ansteckung.errors import DimensionError, GeometryError, OutOfRegionError, ValidationError
from Ansteckung.geometry import Polygon, points_in_polygon, polygon_area, union_region
from utils.logging_setup import get_logger

logger = get_logger(__name__)

AREA_TOLERANCE = 1e-6


@dataclass(eq=False)
class SpaceTimeGrid:
    interval_starts: np.ndarray
    interval_ends: np.ndarray
    tiles: List[Polygon]
    offset: np.ndarray
    covariates: Dict[str, np.ndarray] = field(default_factory=dict)
    tile_ids: List[str] = field(default_factory=list)
    populations: Optional[np.ndarray] = None

    @classmethod
    def build(cls, intervals: Sequence[Tuple[float, float]], tiles: Sequence[Polygon], offset,
              covariates: Optional[Dict[str, object]] = None, tile_ids: Optional[Sequence[str]] = None,
              populations: Optional[Sequence[Optional[float]]] = None) -> "SpaceTimeGrid":
        """Validate every grid invariant and return the grid."""
        if len(intervals) == 0:
            raise ValidationError("Grid needs at least one time interval")
        if len(tiles) == 0:
            raise ValidationError("Grid needs at least one tile")
        bounds = np.asarray(intervals, dtype=float).reshape(-1, 2)
        starts, ends = bounds[:, 0].copy(), bounds[:, 1].copy()
        if starts[0] != 0.0:
            raise ValidationError(f"The first interval must start at day 0, got {starts[0]}")
        for k in range(len(starts)):
            if not ends[k] > starts[k]:
                raise ValidationError(f"Interval {k} is empty or reversed: [{starts[k]}, {ends[k]})")
            if k > 0 and starts[k] != ends[k - 1]:
                raise ValidationError(f"Interval {k} starts at {starts[k]} but interval {k - 1} ends at {ends[k - 1]}")
        D, M = len(starts), len(tiles)

        offset = np.asarray(offset, dtype=float)
        if offset.ndim == 1 and offset.shape[0] == M:
            # A time-constant offset per tile
            offset = np.tile(offset, (D, 1))
        if offset.shape != (D, M):
            raise DimensionError(f"offset table has shape {offset.shape}, expected ({D}, {M})")
        if not np.all(np.isfinite(offset)) or np.any(offset < 0):
            raise ValidationError("offset table must be finite and non-negative")

        tables = {}
        for name, table in (covariates or {}).items():
            arr = np.asarray(table, dtype=float)
            if arr.shape != (D, M):
                raise DimensionError(f"covariate {name} has shape {arr.shape}, expected ({D}, {M})")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"covariate {name} has non-finite entries")
            tables[name] = arr

        ids = [str(i) for i in tile_ids] if tile_ids is not None else [str(k) for k in range(M)]
        if len(ids) != M or len(set(ids)) != M:
            raise ValidationError("tile ids must be unique, one per tile")

        pops = None
        if populations is not None:
            if len(populations) != M:
                raise DimensionError(f"populations has length {len(populations)}, expected {M}")
            pops = np.array([np.nan if p is None else float(p) for p in populations])

        grid = cls(interval_starts=starts, interval_ends=ends, tiles=list(tiles), offset=offset,
                   covariates=tables, tile_ids=ids, populations=pops)
        total = float(np.sum(grid.tile_areas))
        if abs(total - grid.region_area) > AREA_TOLERANCE * grid.region_area:
            raise GeometryError(f"tiles overlap: summed tile area {total:.10g} differs from the region area {grid.region_area:.10g}")
        logger.debug(f"Built grid with {D} intervals and {M} tiles, T={grid.T:g}, |W|={grid.region_area:.6g}")
        return grid

    @property
    def T(self) -> float:
        return float(self.interval_ends[-1])

    @property
    def n_intervals(self) -> int:
        return len(self.interval_starts)

    @property
    def n_tiles(self) -> int:
        return len(self.tiles)

    @cached_property
    def interval_lengths(self) -> np.ndarray:
        return self.interval_ends - self.interval_starts

    @cached_property
    def tile_areas(self) -> np.ndarray:
        return np.array([polygon_area(tile) for tile in self.tiles])

    @cached_property
    def region(self):
        return union_region(self.tiles)

    @cached_property
    def region_area(self) -> float:
        return float(self.region.area)

    @cached_property
    def tile_bounds(self) -> np.ndarray:
        return np.array([tile.bounds for tile in self.tiles])

    def locate_interval(self, t: float) -> int:
        if not (0.0 < t <= self.T):
            raise ValidationError(f"Time {t} lies outside the observation period (0, {self.T:g}]")
        tau = int(np.searchsorted(self.interval_starts, t, side="right")) - 1
        return min(tau, self.n_intervals - 1)

    def locate_intervals(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        bad = np.flatnonzero(~((times > 0.0) & (times <= self.T)))
        if len(bad) > 0:
            raise ValidationError(f"Event {bad[0]} at time {times[bad[0]]} lies outside the observation period (0, {self.T:g}]")
        tau = np.searchsorted(self.interval_starts, times, side="right") - 1
        return np.minimum(tau, self.n_intervals - 1)

    def locate_tiles(self, points: np.ndarray, strict: bool = True) -> np.ndarray:
        """
        Tile index per point; on shared boundaries the lowest tile index wins.
        With strict=False points outside W get -1 instead of raising.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        xi = np.full(points.shape[0], -1, dtype=np.int64)
        for k, tile in enumerate(self.tiles):
            open_idx = np.flatnonzero(xi < 0)
            if len(open_idx) == 0:
                break
            hit = points_in_polygon(points[open_idx], tile)
            xi[open_idx[hit]] = k
        if strict:
            outside = np.flatnonzero(xi < 0)
            if len(outside) > 0:
                raise OutOfRegionError(points[outside[0]])
        return xi

    def locate_tile(self, s) -> int:
        return int(self.locate_tiles(np.asarray(s, dtype=float).reshape(1, 2))[0])

    def locate(self, t: float, s) -> Tuple[int, int]:
        return self.locate_interval(t), self.locate_tile(s)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return points_in_polygon(points, self.region)

    def to_dict(self) -> Dict:
        intervals = [{"start": float(a), "end": float(b)} for a, b in zip(self.interval_starts, self.interval_ends)]
        tiles = []
        for k, tile in enumerate(self.tiles):
            entry = {"id": self.tile_ids[k], "rings": tile.to_rings()}
            if self.populations is not None and np.isfinite(self.populations[k]):
                entry["population"] = float(self.populations[k])
            tiles.append(entry)
        return {
            "tiles": tiles,
            "intervals": intervals,
            "offset": self.offset.tolist(),
            "covariates": {name: table.tolist() for name, table in self.covariates.items()},
        }


def locate(t: float, s, grid: SpaceTimeGrid) -> Tuple[int, int]:
    """(interval, tile) indices of a point of (0, T] x W."""
    return grid.locate(t, s)


def regular_grid(nx: int, ny: int, tile_size: float, interval_length: float, n_intervals: int,
                 offset=1.0, covariates: Optional[Dict[str, object]] = None,
                 populations: Optional[Sequence[float]] = None, origin=(0.0, 0.0)) -> SpaceTimeGrid:
    """Rectangular tiling of [0, nx*size] x [0, ny*size], tiles numbered row by row from the bottom left."""
    x0, y0 = origin
    tiles = []
    ids = []
    for j in range(ny):
        for i in range(nx):
            ax, ay = x0 + i * tile_size, y0 + j * tile_size
            ring = [[ax, ay], [ax + tile_size, ay], [ax + tile_size, ay + tile_size], [ax, ay + tile_size], [ax, ay]]
            tiles.append(Polygon.from_rings([ring], name=f"tile {len(tiles)}"))
            ids.append(f"{i}_{j}")
    intervals = [(k * interval_length, (k + 1) * interval_length) for k in range(n_intervals)]
    M = nx * ny
    offset_table = np.broadcast_to(np.asarray(offset, dtype=float), (n_intervals, M)).copy()
    return SpaceTimeGrid.build(intervals, tiles, offset_table, covariates=covariates, tile_ids=ids,
                               populations=populations)
