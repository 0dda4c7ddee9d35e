import math

from shapely.geometry import Point as ShapelyPoint
from shapely.geometry import Polygon as ShapelyPolygon

from polsim.geometry import (
    Projection,
    point_in_polygon,
    polygon_area,
    polygon_centroid,
    polygon_is_simple,
)
from polsim.rng import SplitMix64


def _random_convexish_polygon(rng, n=8, radius=50.0):
    # Star-shaped polygon: random radii on sorted angles (always simple).
    angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(n))
    return [(rng.uniform(0.3, 1.0) * radius * math.cos(a), rng.uniform(0.3, 1.0) * radius * math.sin(a)) for a in angles]


def test_area_and_centroid_against_shapely_oracle():
    rng = SplitMix64(1)
    for _ in range(50):
        pts = _random_convexish_polygon(rng)
        poly = ShapelyPolygon(pts)
        if not poly.is_valid or poly.area < 1.0:
            continue
        assert abs(polygon_area(pts) - poly.area) < 1e-9
        cx, cy = polygon_centroid(pts)
        assert abs(cx - poly.centroid.x) < 1e-9
        assert abs(cy - poly.centroid.y) < 1e-9


def test_point_in_polygon_against_shapely_oracle():
    rng = SplitMix64(2)
    mismatch = 0
    total = 0
    for _ in range(20):
        pts = _random_convexish_polygon(rng)
        poly = ShapelyPolygon(pts)
        if not poly.is_valid or poly.area < 1.0:
            continue
        for _ in range(100):
            px = rng.uniform(-60, 60)
            py = rng.uniform(-60, 60)
            ours = point_in_polygon(px, py, pts)
            sp = ShapelyPoint(px, py)
            truth = poly.contains(sp) or poly.boundary.distance(sp) < 1e-9
            total += 1
            if ours != truth:
                mismatch += 1
    assert total > 1000
    assert mismatch == 0


def test_point_on_boundary_counts_as_inside():
    sq = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]
    assert point_in_polygon(5.0, 0.0, sq)
    assert point_in_polygon(10.0, 10.0, sq)
    assert point_in_polygon(5.0, 5.0, sq)
    assert not point_in_polygon(10.000001, 5.0, sq)


def test_simple_polygon_detection():
    square = [(0, 0), (10, 0), (10, 10), (0, 10)]
    bowtie = [(0, 0), (10, 10), (10, 0), (0, 10)]
    assert polygon_is_simple(square)
    assert not polygon_is_simple(bowtie)


def test_projection_round_trip_within_1e9_degrees():
    proj = Projection(lon0=13.40, lat0=52.52)
    rng = SplitMix64(3)
    for _ in range(1000):
        lon = 13.40 + rng.uniform(-0.05, 0.05)
        lat = 52.52 + rng.uniform(-0.05, 0.05)
        x, y = proj.to_xy(lon, lat)
        lon2, lat2 = proj.to_lonlat(x, y)
        assert abs(lon2 - lon) < 1e-9
        assert abs(lat2 - lat) < 1e-9


def test_projection_meters_scale_is_sane():
    # One degree of latitude ~ 111.19 km under the spherical model.
    proj = Projection(lon0=0.0, lat0=0.0)
    _, y = proj.to_xy(0.0, 1.0)
    assert abs(y - 111194.9) < 1.0
