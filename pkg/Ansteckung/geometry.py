"""
Planar polygon primitives and midpoint cubature over polygon-disc intersections.

Coordinates are planar kilometres. Polygons are validated once when they are built
from raw rings; every other function assumes valid input.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import shapely
from shapely import affinity
from shapely.geometry import MultiPolygon
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.ops import unary_union
from shapely.validation import explain_validity

from Ansteckung.errors import GeometryError
from utils.config import config
from utils.logging_setup import get_logger

logger = get_logger(__name__)

PointLike = Union[Tuple[float, float], Sequence[float], np.ndarray]
Kernel = Callable[[np.ndarray], np.ndarray]


def signed_ring_area(ring: np.ndarray) -> float:
    """Shoelace signed area of a closed ring, positive for counter-clockwise orientation."""
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * math.fsum(x[:-1] * y[1:] - x[1:] * y[:-1])


@dataclass(frozen=True, eq=False)
class Polygon:
    """Outer ring first (counter-clockwise), then holes (clockwise); every ring closed."""
    rings: Tuple[np.ndarray, ...]

    @classmethod
    def from_rings(cls, rings, name: str = "polygon") -> "Polygon":
        if rings is None or len(rings) == 0:
            raise GeometryError(f"{name}: no rings given")
        arrays = []
        for k, ring in enumerate(rings):
            arr = np.asarray(ring, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise GeometryError(f"{name}: ring {k} must be a list of [x, y] pairs")
            if not np.all(np.isfinite(arr)):
                raise GeometryError(f"{name}: ring {k} has non-finite coordinates")
            if arr.shape[0] < 4 or not np.array_equal(arr[0], arr[-1]):
                raise GeometryError(f"{name}: ring {k} is not closed (first point must equal last point)")
            if len(np.unique(arr[:-1], axis=0)) < 3:
                raise GeometryError(f"{name}: ring {k} has fewer than 3 distinct points")
            area = signed_ring_area(arr)
            if k == 0 and area <= 0:
                raise GeometryError(f"{name}: outer ring must be counter-clockwise with positive area, got {area:.6g}")
            if k > 0 and area >= 0:
                raise GeometryError(f"{name}: hole {k} must be clockwise with negative area, got {area:.6g}")
            arrays.append(arr)
        polygon = cls(tuple(arrays))
        if not polygon.shape.is_valid:
            raise GeometryError(f"{name}: invalid geometry ({explain_validity(polygon.shape)})")
        return polygon

    @classmethod
    def from_shape(cls, shape: ShapelyPolygon) -> "Polygon":
        oriented = shapely.geometry.polygon.orient(shape, sign=1.0)
        rings = [np.asarray(oriented.exterior.coords)] + [np.asarray(r.coords) for r in oriented.interiors]
        return cls(tuple(rings))

    @cached_property
    def shape(self) -> ShapelyPolygon:
        shape = ShapelyPolygon(self.rings[0], [r for r in self.rings[1:]])
        shapely.prepare(shape)
        return shape

    @cached_property
    def bounds(self) -> Tuple[float, float, float, float]:
        return self.shape.bounds

    @cached_property
    def centroid(self) -> np.ndarray:
        c = self.shape.centroid
        return np.array([c.x, c.y])

    def to_rings(self):
        return [ring.tolist() for ring in self.rings]


@dataclass(frozen=True)
class Disc:
    center: Tuple[float, float]
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise GeometryError(f"Disc radius must be finite and positive, got {self.radius}")


@dataclass(frozen=True, eq=False)
class IntegrationRegion:
    """
    Polygon-disc intersection translated so the disc centre is the origin.

    clip_radius bounds every point of the region; polyline_area_error is the relative
    area error of the polygonal disc against the exact disc.
    """
    geometry: object
    clip_radius: float
    disc_radius: float
    area: float
    polyline_area_error: float

    @property
    def is_empty(self) -> bool:
        return self.area <= 0.0

    @cached_property
    def bounds(self) -> Tuple[float, float, float, float]:
        if self.is_empty:
            return (0.0, 0.0, 0.0, 0.0)
        return self.geometry.bounds


@dataclass(frozen=True)
class CubatureResult:
    value: float
    cell_width: float
    n_cells: int
    degenerate: bool = False
    refinements: int = 0


def _as_shape(p) -> object:
    if isinstance(p, Polygon):
        return p.shape
    return p


def polygon_area(p: Polygon) -> float:
    """Shoelace area with holes subtracted."""
    total = math.fsum(signed_ring_area(ring) for ring in p.rings)
    return max(0.0, total)


def points_in_polygon(points: np.ndarray, p) -> np.ndarray:
    """Vectorized point-in-polygon test; boundary points count as inside."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return shapely.intersects_xy(_as_shape(p), points[:, 0], points[:, 1])


def point_in_polygon(pt: PointLike, p) -> bool:
    return bool(points_in_polygon(np.asarray(pt, dtype=float).reshape(1, 2), p)[0])


def union_region(polygons: Sequence[Polygon]):
    """Observation region W as the union of its tiles."""
    shape = unary_union([poly.shape for poly in polygons])
    shapely.prepare(shape)
    return shape


def disc_polygon_radius(radius: float, n_vertices: int, inscribed: bool) -> float:
    """Circumradius of the regular polygon standing in for a disc of the given radius."""
    if inscribed:
        return radius
    # Circumradius giving the polygon exactly the disc's area
    return radius * math.sqrt(2.0 * math.pi / (n_vertices * math.sin(2.0 * math.pi / n_vertices)))


def polyline_area_error(n_vertices: int, inscribed: bool) -> float:
    if inscribed:
        return 1.0 - n_vertices * math.sin(2.0 * math.pi / n_vertices) / (2.0 * math.pi)
    return 0.0


def disc_polygon(d: Disc, n_vertices: int, inscribed: bool) -> ShapelyPolygon:
    if n_vertices < 8:
        raise GeometryError(f"A disc needs at least 8 polygon vertices, got {n_vertices}")
    r = disc_polygon_radius(d.radius, n_vertices, inscribed)
    angles = 2.0 * math.pi * np.arange(n_vertices) / n_vertices
    cx, cy = d.center
    xy = np.column_stack((cx + r * np.cos(angles), cy + r * np.sin(angles)))
    return ShapelyPolygon(xy)


def clip_to_disc(p, d: Disc, n_vertices: Optional[int] = None, inscribed: Optional[bool] = None) -> IntegrationRegion:
    """
    Intersect a polygon (or the observation region) with a disc and translate the result
    so the disc centre becomes the origin. An empty intersection gives a zero-area region.

    The disc is a regular polygon. By default it has the disc's area, so its vertices lie
    slightly beyond the radius (clip_radius > d.radius) and its edge midpoints slightly
    inside; with inscribed=True the vertices sit on the circle and the area falls short.
    Only the integrals use this polygon. Pointwise tests (infective_set, the simulator's
    offset acceptance) use the exact disc |s - centre| <= radius.
    """
    if n_vertices is None:
        n_vertices = int(config.cubature["disc_vertices"])
    if inscribed is None:
        inscribed = bool(config.cubature["inscribed_disc"])
    shape = _as_shape(p)
    disc = disc_polygon(d, n_vertices, inscribed)
    clipped = shape.intersection(disc)
    clipped = affinity.translate(clipped, xoff=-d.center[0], yoff=-d.center[1])
    if not isinstance(clipped, (ShapelyPolygon, MultiPolygon)):
        # Degenerate touches leave lines or points behind
        polys = [g for g in getattr(clipped, "geoms", []) if isinstance(g, ShapelyPolygon)]
        clipped = MultiPolygon(polys) if polys else ShapelyPolygon()
    area = float(clipped.area)
    if not clipped.is_empty:
        shapely.prepare(clipped)
    return IntegrationRegion(
        geometry=clipped,
        clip_radius=disc_polygon_radius(d.radius, n_vertices, inscribed),
        disc_radius=float(d.radius),
        area=area,
        polyline_area_error=polyline_area_error(n_vertices, inscribed),
    )


def _grid_indices(region: IntegrationRegion, cell_width: float):
    """
    Integer indices (i, j) of the cells [i*w, (i+1)*w] x [j*w, (j+1)*w] whose midpoints
    lie in the region. The grid is anchored at the origin (the disc centre).
    """
    minx, miny, maxx, maxy = region.bounds
    i0 = math.floor(minx / cell_width)
    i1 = math.ceil(maxx / cell_width)
    j0 = math.floor(miny / cell_width)
    j1 = math.ceil(maxy / cell_width)
    ii, jj = np.meshgrid(np.arange(i0, i1, dtype=np.int64), np.arange(j0, j1, dtype=np.int64), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    x = (ii + 0.5) * cell_width
    y = (jj + 0.5) * cell_width
    inside = shapely.intersects_xy(region.geometry, x, y)
    return ii[inside], jj[inside]


def _is_degenerate(region: IntegrationRegion, cell_width: float) -> bool:
    minx, miny, maxx, maxy = region.bounds
    return cell_width > max(maxx - minx, maxy - miny)


def cubature_midpoint(kernel: Kernel, region: IntegrationRegion, cell_width: float) -> CubatureResult:
    """
    Two-dimensional midpoint rule: sum of kernel(midpoint) * cell_width**2 over the
    axis-aligned cells whose midpoints lie in the region.

    kernel takes an (m, 2) array of points and returns m values.
    """
    if not cell_width > 0:
        raise GeometryError(f"cell_width must be positive, got {cell_width}")
    if region.is_empty:
        return CubatureResult(value=0.0, cell_width=cell_width, n_cells=0)
    if _is_degenerate(region, cell_width):
        rep = region.geometry.representative_point()
        value = float(np.asarray(kernel(np.array([[rep.x, rep.y]])))[0]) * region.area
        logger.warning(f"Cell width {cell_width:.6g} exceeds the region extent; using a single-cell estimate")
        return CubatureResult(value=value, cell_width=cell_width, n_cells=1, degenerate=True)
    ii, jj = _grid_indices(region, cell_width)
    if len(ii) == 0:
        return CubatureResult(value=0.0, cell_width=cell_width, n_cells=0)
    midpoints = np.column_stack(((ii + 0.5) * cell_width, (jj + 0.5) * cell_width))
    values = np.asarray(kernel(midpoints), dtype=float)
    value = math.fsum(values) * cell_width * cell_width
    return CubatureResult(value=value, cell_width=cell_width, n_cells=int(len(ii)))


def default_cell_width(region: IntegrationRegion) -> float:
    return region.disc_radius / float(config.cubature["cells_per_radius"])


def adaptive_cubature(kernel: Kernel, region: IntegrationRegion, cell_width: Optional[float] = None,
                      tolerance: Optional[float] = None, max_refinements: Optional[int] = None) -> CubatureResult:
    """Halve the cell width until successive estimates agree to the relative tolerance."""
    if cell_width is None:
        cell_width = default_cell_width(region)
    if tolerance is None:
        tolerance = float(config.cubature["refinement_tolerance"])
    if max_refinements is None:
        max_refinements = int(config.cubature["max_refinements"])
    result = cubature_midpoint(kernel, region, cell_width)
    for refinement in range(1, max_refinements + 1):
        finer = cubature_midpoint(kernel, region, result.cell_width / 2.0)
        finer = CubatureResult(finer.value, finer.cell_width, finer.n_cells, finer.degenerate, refinement)
        if _converged(result.value, finer.value, tolerance):
            return finer
        result = finer
    return result


def _converged(previous: float, current: float, tolerance: float) -> bool:
    scale = max(abs(current), abs(previous))
    return scale == 0.0 or abs(current - previous) <= tolerance * scale


@dataclass(frozen=True, eq=False)
class RadialCellSet:
    """
    Midpoint cells of a region collapsed by squared distance from the origin.

    Radial kernels only need r**2, so cells with equal radius are merged; the set
    integrates any radial function and its parameter derivatives on the same cells.
    """
    r2: np.ndarray
    weights: np.ndarray
    cell_width: float
    n_cells: int = 0
    degenerate: bool = False
    refinements: int = 0

    @classmethod
    def empty(cls, cell_width: float = 0.0) -> "RadialCellSet":
        return cls(r2=np.zeros(0), weights=np.zeros(0), cell_width=cell_width)

    @classmethod
    def from_region(cls, region: IntegrationRegion, cell_width: float) -> "RadialCellSet":
        if not cell_width > 0:
            raise GeometryError(f"cell_width must be positive, got {cell_width}")
        if region.is_empty:
            return cls.empty(cell_width)
        if _is_degenerate(region, cell_width):
            rep = region.geometry.representative_point()
            logger.debug(f"Cell width {cell_width:.6g} exceeds the region extent; using a single-cell estimate")
            return cls(r2=np.array([rep.x * rep.x + rep.y * rep.y]), weights=np.array([region.area]),
                       cell_width=cell_width, n_cells=1, degenerate=True)
        ii, jj = _grid_indices(region, cell_width)
        # ((i + 1/2)^2 + (j + 1/2)^2) = i(i+1) + j(j+1) + 1/2 exactly in integers
        keys = ii * (ii + 1) + jj * (jj + 1)
        unique_keys, counts = np.unique(keys, return_counts=True)
        r2 = (unique_keys.astype(float) + 0.5) * cell_width * cell_width
        weights = counts.astype(float) * cell_width * cell_width
        return cls(r2=r2, weights=weights, cell_width=cell_width, n_cells=int(len(keys)))

    @classmethod
    def adaptive(cls, radial_kernel: Callable[[np.ndarray], np.ndarray], region: IntegrationRegion,
                 cell_width: Optional[float] = None, tolerance: Optional[float] = None,
                 max_refinements: Optional[int] = None) -> "RadialCellSet":
        if cell_width is None:
            cell_width = default_cell_width(region)
        if tolerance is None:
            tolerance = float(config.cubature["refinement_tolerance"])
        if max_refinements is None:
            max_refinements = int(config.cubature["max_refinements"])
        cells = cls.from_region(region, cell_width)
        for refinement in range(1, max_refinements + 1):
            finer = cls.from_region(region, cells.cell_width / 2.0)
            finer = cls(finer.r2, finer.weights, finer.cell_width, finer.n_cells, finer.degenerate, refinement)
            if _converged(cells.integrate(radial_kernel), finer.integrate(radial_kernel), tolerance):
                return finer
            cells = finer
        return cells

    def integrate(self, radial_kernel: Callable[[np.ndarray], np.ndarray]) -> float:
        if len(self.r2) == 0:
            return 0.0
        return math.fsum(self.weights * np.asarray(radial_kernel(self.r2), dtype=float))
