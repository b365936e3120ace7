"""Tests for polygons, disc clipping and the cubature of radial kernels."""

import math

import numpy as np
import pytest

from Ansteckung.errors import GeometryError
from Ansteckung.geometry import (Disc, Polygon, RadialCellSet, adaptive_cubature, clip_to_disc, cubature_midpoint,
                                 point_in_polygon, points_in_polygon, polygon_area, polyline_area_error)

UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]


def square(x0, y0, size):
    return Polygon.from_rings([[[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size], [x0, y0]]])


def winding_number(pt, ring):
    """Independent point-in-polygon oracle for a simple ring."""
    wn = 0
    x, y = pt
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        if y0 <= y < y1 and cross > 0:
            wn += 1
        elif y1 <= y < y0 and cross < 0:
            wn -= 1
    return wn != 0


class TestPolygon:
    """Polygon construction and validation."""

    def test_unit_square_area(self):
        """Test the shoelace area of the unit square."""
        assert polygon_area(Polygon.from_rings([UNIT_SQUARE])) == pytest.approx(1.0)

    def test_hole_is_subtracted(self):
        """Test that a centred 0.5 x 0.5 hole leaves 0.75."""
        hole = [[0.25, 0.25], [0.25, 0.75], [0.75, 0.75], [0.75, 0.25], [0.25, 0.25]]
        assert polygon_area(Polygon.from_rings([UNIT_SQUARE, hole])) == pytest.approx(0.75)

    def test_convex_hull_against_hit_counting(self):
        """Test a random convex polygon against a Monte Carlo area estimate."""
        from shapely.geometry import MultiPoint
        rng = np.random.default_rng(0)
        hull = MultiPoint(rng.uniform(0, 1, (50, 2))).convex_hull
        polygon = Polygon.from_shape(hull)
        samples = rng.uniform(0, 1, (1000000, 2))
        estimate = np.mean(points_in_polygon(samples, polygon))
        assert polygon_area(polygon) == pytest.approx(estimate, rel=1e-2)

    def test_unclosed_ring_is_rejected(self):
        """Test that an open ring raises a geometry error naming the polygon."""
        with pytest.raises(GeometryError, match="tile A"):
            Polygon.from_rings([UNIT_SQUARE[:-1]], name="tile A")

    def test_clockwise_outer_ring_is_rejected(self):
        """Test that the outer ring must be counter-clockwise."""
        with pytest.raises(GeometryError, match="counter-clockwise"):
            Polygon.from_rings([UNIT_SQUARE[::-1]])

    def test_self_intersection_is_rejected(self):
        """Test that a bow-tie ring is invalid."""
        with pytest.raises(GeometryError):
            Polygon.from_rings([[[0, 0], [1, 1], [1, 0.2], [0, 1], [0, 0]]])


class TestPointInPolygon:
    """Point membership, including boundary points."""

    def test_inside_and_outside(self):
        """Test the two trivial unit-square cases."""
        polygon = Polygon.from_rings([UNIT_SQUARE])
        assert point_in_polygon((0.5, 0.5), polygon)
        assert not point_in_polygon((1.5, 0.5), polygon)

    def test_boundary_counts_as_inside(self):
        """Test that points on an edge belong to the polygon."""
        assert point_in_polygon((1.0, 0.5), Polygon.from_rings([UNIT_SQUARE]))

    def test_matches_winding_number(self):
        """Test 1000 random points against the winding-number oracle on an L-shaped ring."""
        ring = [[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2], [0, 0]]
        polygon = Polygon.from_rings([ring])
        points = np.random.default_rng(1).uniform(-0.5, 2.5, (1000, 2))
        expected = np.array([winding_number(p, ring) for p in points])
        np.testing.assert_array_equal(points_in_polygon(points, polygon), expected)


class TestClipToDisc:
    """Intersections of polygons with polygonal discs."""

    def test_quarter_disc(self):
        """Test the unit square clipped by the unit disc at the origin."""
        region = clip_to_disc(Polygon.from_rings([UNIT_SQUARE]), Disc((0.0, 0.0), 1.0), n_vertices=64, inscribed=False)
        assert region.area == pytest.approx(math.pi / 4, rel=1e-3)

    def test_disjoint_region_is_empty(self):
        """Test that a far square gives an empty zero-area region."""
        region = clip_to_disc(square(2, 2, 1), Disc((0.0, 0.0), 1.0))
        assert region.is_empty
        assert region.area == 0.0

    def test_contained_disc_is_area_preserving(self):
        """Test that the default polygonal disc has exactly the disc's area."""
        region = clip_to_disc(square(-5, -5, 10), Disc((0.0, 0.0), 2.0), n_vertices=64, inscribed=False)
        assert region.area == pytest.approx(4 * math.pi, rel=1e-12)
        assert region.polyline_area_error == 0.0

    def test_inscribed_disc_reports_its_area_error(self):
        """Test the inscribed polygon's relative area deficit."""
        region = clip_to_disc(square(-5, -5, 10), Disc((0.0, 0.0), 2.0), n_vertices=64, inscribed=True)
        assert region.area == pytest.approx(4 * math.pi * (1 - polyline_area_error(64, True)), rel=1e-12)
        assert region.polyline_area_error < 2e-3

    def test_area_preserving_polygon_reaches_past_the_radius(self):
        """Test that the default polygon's vertices lie beyond the radius while the inscribed one's sit on it."""
        default = clip_to_disc(square(-5, -5, 10), Disc((0.0, 0.0), 2.0), n_vertices=16, inscribed=False)
        inscribed = clip_to_disc(square(-5, -5, 10), Disc((0.0, 0.0), 2.0), n_vertices=16, inscribed=True)
        assert default.clip_radius > 2.0
        assert inscribed.clip_radius == 2.0
        reach = np.max(np.hypot(*np.asarray(default.geometry.exterior.coords).T))
        assert reach == pytest.approx(default.clip_radius, rel=1e-12)
        assert reach > 2.0

    def test_region_is_translated_to_the_disc_centre(self):
        """Test that the clipped region is centred on the origin."""
        region = clip_to_disc(square(0, 0, 10), Disc((5.0, 5.0), 1.0))
        minx, miny, maxx, maxy = region.bounds
        assert minx == pytest.approx(-maxx)
        assert miny == pytest.approx(-maxy)

    def test_too_few_vertices(self):
        """Test that a disc polygon needs at least 8 vertices."""
        with pytest.raises(GeometryError):
            clip_to_disc(square(0, 0, 1), Disc((0.0, 0.0), 1.0), n_vertices=4)

    def test_nonpositive_radius(self):
        """Test that a zero radius is rejected."""
        with pytest.raises(GeometryError):
            Disc((0.0, 0.0), 0.0)


class TestCubature:
    """Midpoint and adaptive cubature against exact integrals."""

    def test_constant_kernel_gives_area(self):
        """Test that integrating 1 over the unit square returns its area."""
        region = clip_to_disc(Polygon.from_rings([UNIT_SQUARE]), Disc((0.5, 0.5), 5.0))
        result = cubature_midpoint(lambda p: np.ones(len(p)), region, 0.01)
        assert result.value == pytest.approx(1.0, abs=1e-2)

    def test_gaussian_over_disc(self):
        """Test exp(-r^2/2) over the unit disc against 2 pi (1 - e^-1/2)."""
        region = clip_to_disc(square(-5, -5, 10), Disc((0.0, 0.0), 1.0), n_vertices=256)
        kernel = lambda p: np.exp(-0.5 * np.sum(p * p, axis=1))
        result = adaptive_cubature(kernel, region, cell_width=0.01, tolerance=1e-6, max_refinements=2)
        assert result.value == pytest.approx(2 * math.pi * (1 - math.exp(-0.5)), rel=1e-3)

    def test_gaussian_against_monte_carlo(self):
        """Test a clipped Gaussian integral against uniform sampling of the region."""
        region = clip_to_disc(square(0, -1, 2), Disc((0.0, 0.0), 1.0))
        kernel = lambda p: np.exp(-0.5 * np.sum(p * p, axis=1))
        value = cubature_midpoint(kernel, region, 0.005).value
        rng = np.random.default_rng(2)
        samples = rng.uniform(-1, 1, (4000000, 2))
        inside = samples[points_in_polygon(samples, region.geometry)]
        oracle = region.area * np.mean(kernel(inside))
        assert value == pytest.approx(oracle, rel=1e-3)

    def test_empty_region(self):
        """Test that an empty region integrates to zero."""
        region = clip_to_disc(square(2, 2, 1), Disc((0.0, 0.0), 1.0))
        assert cubature_midpoint(lambda p: np.ones(len(p)), region, 0.1).value == 0.0

    def test_degenerate_cell_uses_single_estimate(self):
        """Test that a cell wider than the region falls back to kernel times area."""
        region = clip_to_disc(square(-5, -5, 10), Disc((0.0, 0.0), 0.1))
        result = cubature_midpoint(lambda p: np.full(len(p), 2.0), region, 1.0)
        assert result.degenerate
        assert result.value == pytest.approx(2.0 * region.area)

    def test_invalid_cell_width(self):
        """Test that the cell width must be positive."""
        region = clip_to_disc(square(0, 0, 1), Disc((0.0, 0.0), 1.0))
        with pytest.raises(GeometryError):
            cubature_midpoint(lambda p: np.ones(len(p)), region, 0.0)


class TestRadialCellSet:
    """Cached radial cells reused across kernel parameters."""

    def test_matches_plain_midpoint_rule(self):
        """Test that merging cells by radius leaves the midpoint sum unchanged."""
        region = clip_to_disc(square(-1, -3, 5), Disc((0.0, 0.0), 2.0))
        cells = RadialCellSet.from_region(region, 0.05)
        plain = cubature_midpoint(lambda p: np.exp(-0.3 * np.sum(p * p, axis=1)), region, 0.05).value
        assert cells.integrate(lambda r2: np.exp(-0.3 * r2)) == pytest.approx(plain, rel=1e-12)
        assert cells.n_cells >= len(cells.r2)

    def test_adaptive_refines_until_stable(self):
        """Test that the adaptive set reaches the closed-form Gaussian disc integral."""
        region = clip_to_disc(square(-5, -5, 10), Disc((0.0, 0.0), 1.0), n_vertices=512)
        cells = RadialCellSet.adaptive(lambda r2: np.exp(-0.5 * r2), region, cell_width=0.05, tolerance=1e-5, max_refinements=4)
        assert cells.integrate(lambda r2: np.exp(-0.5 * r2)) == pytest.approx(2 * math.pi * (1 - math.exp(-0.5)), rel=1e-3)

    def test_empty_set(self):
        """Test that the empty set integrates to zero."""
        assert RadialCellSet.empty(0.1).integrate(lambda r2: np.ones_like(r2)) == 0.0
