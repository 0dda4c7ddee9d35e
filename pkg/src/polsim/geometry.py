"""Planar geometry primitives and the lon/lat <-> meters projection.

All map geometry lives in local planar meters: an equirectangular projection
about a fixed origin (the midpoint of the input lon/lat bounding box), so
Euclidean distances are meters and the hot loop never touches geodesic math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

EARTH_RADIUS_M = 6371000.0

_EPS = 1e-9

Coord = tuple[float, float]


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Projection:
    """Equirectangular projection about (lon0, lat0), in degrees."""

    lon0: float
    lat0: float

    def to_xy(self, lon: float, lat: float) -> Coord:
        k = EARTH_RADIUS_M * math.pi / 180.0
        x = (lon - self.lon0) * k * math.cos(math.radians(self.lat0))
        y = (lat - self.lat0) * k
        return (x, y)

    def to_lonlat(self, x: float, y: float) -> Coord:
        k = EARTH_RADIUS_M * math.pi / 180.0
        lon = self.lon0 + x / (k * math.cos(math.radians(self.lat0)))
        lat = self.lat0 + y / k
        return (lon, lat)


def dist(ax: float, ay: float, bx: float, by: float) -> float:
    return math.hypot(bx - ax, by - ay)


def polygon_area(pts: Sequence[Coord]) -> float:
    """Unsigned shoelace area. ``pts`` is an open ring (no repeated vertex)."""
    n = len(pts)
    if n < 3:
        return 0.0
    s = 0.0
    x0, y0 = pts[-1]
    for x1, y1 in pts:
        s += x0 * y1 - x1 * y0
        x0, y0 = x1, y1
    return abs(s) * 0.5


def polygon_centroid(pts: Sequence[Coord]) -> Coord:
    """Area centroid; falls back to the vertex mean for degenerate rings."""
    n = len(pts)
    sa = 0.0
    cx = 0.0
    cy = 0.0
    x0, y0 = pts[-1]
    for x1, y1 in pts:
        cross = x0 * y1 - x1 * y0
        sa += cross
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
        x0, y0 = x1, y1
    if abs(sa) < _EPS:
        return (sum(p[0] for p in pts) / n, sum(p[1] for p in pts) / n)
    return (cx / (3.0 * sa), cy / (3.0 * sa))


def point_segment_distance(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    vx, vy = bx - ax, by - ay
    wx, wy = px - ax, py - ay
    c1 = vx * wx + vy * wy
    if c1 <= 0.0:
        return math.hypot(px - ax, py - ay)
    c2 = vx * vx + vy * vy
    if c2 <= c1:
        return math.hypot(px - bx, py - by)
    t = c1 / c2
    return math.hypot(px - (ax + t * vx), py - (ay + t * vy))


def point_in_polygon(px: float, py: float, pts: Sequence[Coord], boundary_eps: float = _EPS) -> bool:
    """Ray-casting test; points within ``boundary_eps`` of an edge count as inside."""
    n = len(pts)
    inside = False
    x0, y0 = pts[-1]
    for x1, y1 in pts:
        if point_segment_distance(px, py, x0, y0, x1, y1) <= boundary_eps:
            return True
        if (y0 > py) != (y1 > py):
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            if px < xint:
                inside = not inside
        x0, y0 = x1, y1
    return inside


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, px, py) -> bool:
    return min(ax, bx) - _EPS <= px <= max(ax, bx) + _EPS and min(ay, by) - _EPS <= py <= max(ay, by) + _EPS


def segments_properly_intersect(a: Coord, b: Coord, c: Coord, d: Coord) -> bool:
    """True when segments ab and cd cross or overlap away from shared endpoints."""
    d1 = _orient(*c, *d, *a)
    d2 = _orient(*c, *d, *b)
    d3 = _orient(*a, *b, *c)
    d4 = _orient(*a, *b, *d)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if abs(d1) < _EPS and _on_segment(*c, *d, *a):
        return True
    if abs(d2) < _EPS and _on_segment(*c, *d, *b):
        return True
    if abs(d3) < _EPS and _on_segment(*a, *b, *c):
        return True
    if abs(d4) < _EPS and _on_segment(*a, *b, *d):
        return True
    return False


def polygon_is_simple(pts: Sequence[Coord]) -> bool:
    """No two non-adjacent edges intersect; adjacent edges meet only at the shared vertex."""
    n = len(pts)
    if n < 3:
        return False
    edges = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        a, b = edges[i]
        for j in range(i + 1, n):
            c, d = edges[j]
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                # The shared vertex is a legal touch; anything more is not.
                shared = b if j == i + 1 else a
                other_i = a if j == i + 1 else b
                other_j = d if j == i + 1 else c
                if point_segment_distance(*other_i, *c, *d) < _EPS and (other_i != shared):
                    return False
                if point_segment_distance(*other_j, *a, *b) < _EPS and (other_j != shared):
                    return False
                continue
            if segments_properly_intersect(a, b, c, d):
                return False
    return True
