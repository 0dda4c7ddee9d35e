"""Map layers, walkway graph, spatial index, and GeoJSON ingestion.

The ingestion pipeline turns three GeoJSON layers (buildings, optional
building units, walkways) into an immutable :class:`WorldMap`:

  * polygons are projected to local planar meters,
  * buildings without an explicit units layer are subdivided on a grid,
  * rents / wages / meal prices are drawn from configured ranges using the
    ``init`` stream of the ingest seed,
  * walkway vertices are deduplicated (exact match, then 0.5 m snap) and the
    graph is cleaned (self-loops and duplicate edges dropped, isolated nodes
    removed) and must come out connected,
  * every unit is anchored to its nearest walkway node.

Serialized maps carry the format tag ``polmap/1`` and are byte-deterministic
for identical inputs and seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import MapError, ParseError
from .geometry import (
    Coord,
    Projection,
    dist,
    point_in_polygon,
    polygon_area,
    polygon_centroid,
    polygon_is_simple,
)
from .rng import derive_stream

# Unit / building kinds. Small ints keep hot-loop comparisons cheap.
RESIDENTIAL = 0
WORKPLACE = 1
RESTAURANT = 2
RECREATION = 3

ALL_KINDS = (RESIDENTIAL, WORKPLACE, RESTAURANT, RECREATION)

KIND_NAMES = {
    RESIDENTIAL: "residential",
    WORKPLACE: "workplace",
    RESTAURANT: "restaurant",
    RECREATION: "recreation",
}
KIND_BY_NAME = {v: k for k, v in KIND_NAMES.items()}

# Buildings tagged just "commercial" get these kinds round-robin, in feature order.
_COMMERCIAL_CYCLE = (WORKPLACE, RESTAURANT, RECREATION)

SNAP_TOLERANCE_M = 0.5
_LENGTH_SLACK = 1e-6


@dataclass(frozen=True)
class Building:
    id: int
    kind: int
    footprint: tuple[Coord, ...]
    source_tags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BuildingUnit:
    id: int
    building_id: int
    kind: int
    x: float
    y: float
    rent_per_day: int | None = None  # cents, Residential only
    wage_per_tick: int | None = None  # cents, Workplace only
    meal_price: int | None = None  # cents, Restaurant only


@dataclass(frozen=True)
class IngestConfig:
    seed: int = 0
    unit_area: float = 100.0  # m^2 per auto-generated unit
    rent_range: tuple[int, int] = (1000, 3000)  # cents/day
    wage_range: tuple[int, int] = (40, 80)  # cents/tick
    meal_range: tuple[int, int] = (500, 1500)  # cents/meal


class UniformGridIndex:
    """Uniform-grid point index with exact k-nearest queries.

    Exactness contract: results match a full linear scan ordered by
    (squared distance, id), including ties. Comparisons use dx*dx + dy*dy
    (never hypot) so scalar and vectorized scans order candidates
    identically bit-for-bit. Ring expansion keeps going while the nearest
    unscanned cell could still hold a point at <= the kth distance.
    """

    def __init__(self, points: list[tuple[int, float, float]], cell: float):
        self.cell = cell
        self.points = points
        if points:
            self.minx = min(p[1] for p in points)
            self.miny = min(p[2] for p in points)
            maxx = max(p[1] for p in points)
            maxy = max(p[2] for p in points)
            self.ncx = max(1, int((maxx - self.minx) / cell) + 1)
            self.ncy = max(1, int((maxy - self.miny) / cell) + 1)
        else:
            self.minx = self.miny = 0.0
            self.ncx = self.ncy = 1
        self.cells: dict[tuple[int, int], list[tuple[int, float, float]]] = {}
        for pid, x, y in points:
            self.cells.setdefault(self._cell_of(x, y), []).append((pid, x, y))

    def _cell_of(self, x: float, y: float) -> tuple[int, int]:
        cx = int((x - self.minx) / self.cell)
        cy = int((y - self.miny) / self.cell)
        return (min(max(cx, 0), self.ncx - 1), min(max(cy, 0), self.ncy - 1))

    def nearest(self, x: float, y: float, k: int = 1) -> list[tuple[float, int]]:
        """k nearest points as (distance, id), ascending (squared distance, id)."""
        if not self.points or k < 1:
            return []
        cx, cy = self._cell_of(x, y)
        best: list[tuple[float, int]] = []  # (d2, id)
        r = 0
        max_r = max(self.ncx, self.ncy)
        while True:
            for gx, gy in self._ring(cx, cy, r):
                bucket = self.cells.get((gx, gy))
                if not bucket:
                    continue
                for pid, px, py in bucket:
                    dx = px - x
                    dy = py - y
                    best.append((dx * dx + dy * dy, pid))
            best.sort()
            kth = best[k - 1][0] if len(best) >= k else math.inf
            if r >= max_r:
                break
            # Distance from the query point to anything outside the scanned
            # square of rings 0..r; <= (not <) keeps equal-distance smaller
            # ids in farther cells reachable.
            left = x - (self.minx + (cx - r) * self.cell)
            right = (self.minx + (cx + r + 1) * self.cell) - x
            bottom = y - (self.miny + (cy - r) * self.cell)
            top = (self.miny + (cy + r + 1) * self.cell) - y
            dmin = min(left, right, bottom, top)
            # Guard band keeps ulp-level boundary ties inside the scan.
            if len(best) >= k and dmin > 0.0 and dmin * dmin > kth * (1.0 + 1e-12) + 1e-12:
                break
            r += 1
        return [(math.sqrt(d2), pid) for d2, pid in best[:k]]

    def _ring(self, cx: int, cy: int, r: int):
        if r == 0:
            if 0 <= cx < self.ncx and 0 <= cy < self.ncy:
                yield (cx, cy)
            return
        for gx in range(cx - r, cx + r + 1):
            if 0 <= gx < self.ncx:
                if 0 <= cy - r < self.ncy:
                    yield (gx, cy - r)
                if 0 <= cy + r < self.ncy:
                    yield (gx, cy + r)
        for gy in range(cy - r + 1, cy + r):
            if 0 <= gy < self.ncy:
                if 0 <= cx - r < self.ncx:
                    yield (cx - r, gy)
                if 0 <= cx + r < self.ncx:
                    yield (cx + r, gy)


class WalkwayGraph:
    """Undirected walkway network. Node ids are dense 0..n-1."""

    def __init__(self, nodes: list[Coord], edges: list[tuple[int, int, float]]):
        self.nodes = nodes
        self.edges = edges
        self.adj: list[list[tuple[int, float]]] = [[] for _ in nodes]
        for u, v, w in edges:
            self.adj[u].append((v, w))
            self.adj[v].append((u, w))
        self._node_index: UniformGridIndex | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    def node_index(self) -> UniformGridIndex:
        if self._node_index is None:
            pts = [(i, x, y) for i, (x, y) in enumerate(self.nodes)]
            self._node_index = UniformGridIndex(pts, _grid_cell_size(self.nodes))
        return self._node_index

    def component_sizes(self) -> list[int]:
        """Connected-component sizes, largest first."""
        n = len(self.nodes)
        seen = [False] * n
        sizes = []
        for start in range(n):
            if seen[start]:
                continue
            stack = [start]
            seen[start] = True
            count = 0
            while stack:
                u = stack.pop()
                count += 1
                for v, _ in self.adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            sizes.append(count)
        sizes.sort(reverse=True)
        return sizes

    def dijkstra(self, source: int) -> list[float]:
        """Distances from source to every node (inf when unreachable)."""
        import heapq

        n = len(self.nodes)
        distances = [math.inf] * n
        distances[source] = 0.0
        heap = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > distances[u]:
                continue
            for v, w in self.adj[u]:
                nd = d + w
                if nd < distances[v]:
                    distances[v] = nd
                    heapq.heappush(heap, (nd, v))
        return distances


def _grid_cell_size(points: list[Coord]) -> float:
    if not points:
        return 50.0
    minx = min(p[0] for p in points)
    maxx = max(p[0] for p in points)
    miny = min(p[1] for p in points)
    maxy = max(p[1] for p in points)
    diag = math.hypot(maxx - minx, maxy - miny)
    return max(50.0, diag / 256.0)


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    anchor_teleport_bound: float = 0.0
    component_sizes: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def render(self) -> str:
        lines = ["polvalidate/1"]
        lines.append(f"errors = {len(self.errors)}")
        lines.append(f"warnings = {len(self.warnings)}")
        lines.append(f"anchor_teleport_bound_m = {self.anchor_teleport_bound:.6f}")
        lines.append(f"graph_components = {','.join(str(s) for s in self.component_sizes) or '0'}")
        for e in self.errors:
            lines.append(f"error: {e}")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines) + "\n"


class WorldMap:
    """Immutable simulation environment.

    ``units`` is keyed by unit id; ``unit_ids_by_kind`` lists ids ascending;
    ``anchors`` maps unit id -> nearest walkway node id.
    """

    def __init__(
        self,
        buildings: list[Building],
        units: list[BuildingUnit],
        graph: WalkwayGraph,
        projection: Projection,
        ingest_stats: dict | None = None,
    ):
        self.buildings = {b.id: b for b in buildings}
        self.building_list = buildings
        self.units = {u.id: u for u in units}
        self.unit_list = units
        self.graph = graph
        self.projection = projection
        self.ingest_stats = ingest_stats or {}

        self.unit_ids_by_kind: dict[int, list[int]] = {k: [] for k in ALL_KINDS}
        for u in units:
            self.unit_ids_by_kind[u.kind].append(u.id)
        for ids in self.unit_ids_by_kind.values():
            ids.sort()

        self.anchors: dict[int, int] = {}
        node_index = graph.node_index()
        bound = 0.0
        for u in units:
            hits = node_index.nearest(u.x, u.y, 1)
            self.anchors[u.id] = hits[0][1]
            if hits[0][0] > bound:
                bound = hits[0][0]
        self.anchor_teleport_bound = bound

        cell = _grid_cell_size([(u.x, u.y) for u in units])
        self._kind_index: dict[int, UniformGridIndex] = {}
        for kind in ALL_KINDS:
            pts = [(u.id, u.x, u.y) for u in units if u.kind == kind]
            self._kind_index[kind] = UniformGridIndex(pts, cell)

    def unit_location(self, unit_id: int) -> Coord:
        u = self.units[unit_id]
        return (u.x, u.y)


def nearest_node(graph: WalkwayGraph, p: Coord) -> int:
    """Node minimizing Euclidean distance to p; ties go to the smallest id."""
    if len(graph) == 0:
        raise MapError("nearest_node on empty graph")
    return graph.node_index().nearest(p[0], p[1], 1)[0][1]


def euclidean_nearest_unit(world: WorldMap, p: Coord, kind: int, k: int = 1) -> list[int]:
    """Up to k unit ids of ``kind``, ascending (Euclidean distance, id)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return [pid for _, pid in world._kind_index[kind].nearest(p[0], p[1], k)]


def network_nearest_unit(world: WorldMap, from_node: int, kind: int) -> int | None:
    """Unit of ``kind`` whose anchor minimizes shortest-path distance.

    Runs a full single-source Dijkstra (this is the deliberately expensive
    vanilla-mode POI selection), then takes the (distance, unit id) minimum.
    """
    distances = world.graph.dijkstra(from_node)
    best: tuple[float, int] | None = None
    for uid in world.unit_ids_by_kind[kind]:
        d = distances[world.anchors[uid]]
        if d == math.inf:
            continue
        cand = (d, uid)
        if best is None or cand < best:
            best = cand
    return best[1] if best is not None else None


def subdivide_building(building: Building, unit_area: float, start_id: int = 0) -> list[BuildingUnit]:
    """Auto-generate max(1, floor(area/unit_area)) units inside the footprint.

    Placement: centers of an n x m grid over the bounding box with cell edge
    ~sqrt(unit_area), clipped to the footprint, row-major. If the clipped grid
    yields fewer points than needed, all units fall back to the centroid.
    """
    if unit_area <= 0:
        raise ValueError("unit_area must be > 0")
    area = polygon_area(building.footprint)
    n_units = max(1, int(area / unit_area))
    cx, cy = polygon_centroid(building.footprint)

    if n_units == 1:
        loc = (cx, cy) if point_in_polygon(cx, cy, building.footprint) else None
    else:
        loc = None

    positions: list[Coord] = []
    if loc is not None:
        positions = [loc]
    else:
        xs = [p[0] for p in building.footprint]
        ys = [p[1] for p in building.footprint]
        minx, maxx = min(xs), max(xs)
        miny, maxy = min(ys), max(ys)
        side = math.sqrt(unit_area)
        ncols = max(1, math.ceil((maxx - minx) / side))
        nrows = max(1, math.ceil((maxy - miny) / side))
        for j in range(nrows):
            py = miny + (j + 0.5) * (maxy - miny) / nrows
            for i in range(ncols):
                px = minx + (i + 0.5) * (maxx - minx) / ncols
                if point_in_polygon(px, py, building.footprint):
                    positions.append((px, py))
        if len(positions) < n_units:
            fallback = (cx, cy) if point_in_polygon(cx, cy, building.footprint) else building.footprint[0]
            positions = [fallback] * n_units
        else:
            positions = positions[:n_units]

    return [
        BuildingUnit(id=start_id + i, building_id=building.id, kind=building.kind, x=px, y=py)
        for i, (px, py) in enumerate(positions)
    ]


# ---------------------------------------------------------------------------
# GeoJSON ingestion
# ---------------------------------------------------------------------------


def _load_feature_collection(path: str, layer: str) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read GeoJSON: {exc}", layer=layer) from exc
    if doc.get("type") != "FeatureCollection" or "features" not in doc:
        raise ParseError("not a FeatureCollection", layer=layer)
    return doc["features"]


def _lonlat_bounds(features_per_layer: list[list[dict]]) -> tuple[float, float, float, float]:
    minlon = minlat = math.inf
    maxlon = maxlat = -math.inf

    def visit(coords):
        nonlocal minlon, minlat, maxlon, maxlat
        if isinstance(coords[0], (int, float)):
            lon, lat = coords[0], coords[1]
            minlon = min(minlon, lon)
            maxlon = max(maxlon, lon)
            minlat = min(minlat, lat)
            maxlat = max(maxlat, lat)
        else:
            for c in coords:
                visit(c)

    for features in features_per_layer:
        for feat in features:
            geom = feat.get("geometry") or {}
            if "coordinates" in geom and geom["coordinates"]:
                visit(geom["coordinates"])
    if not math.isfinite(minlon):
        raise ParseError("no coordinates found in any layer", layer="map")
    return minlon, minlat, maxlon, maxlat


def _parse_buildings(features: list[dict], projection: Projection) -> list[Building]:
    buildings: list[Building] = []
    seen_ids: set[int] = set()
    commercial_counter = 0
    for i, feat in enumerate(features):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        if geom.get("type") != "Polygon":
            raise ParseError(f"expected Polygon geometry, got {geom.get('type')}", layer="buildings", feature=i)
        rings = geom.get("coordinates") or []
        if not rings:
            raise ParseError("empty polygon", layer="buildings", feature=i)
        ring = rings[0]
        if len(ring) >= 2 and ring[0] == ring[-1]:
            ring = ring[:-1]
        if len(ring) < 3:
            raise ParseError(f"degenerate polygon with {len(ring)} vertices", layer="buildings", feature=i)
        if "id" not in props:
            raise ParseError("missing required property 'id'", layer="buildings", feature=i)
        bid = int(props["id"])
        if bid in seen_ids:
            raise ParseError(f"duplicate building id {bid}", layer="buildings", feature=i)
        seen_ids.add(bid)
        kind_tag = str(props.get("kind", "")).lower()
        if kind_tag in KIND_BY_NAME:
            kind = KIND_BY_NAME[kind_tag]
        elif kind_tag == "commercial":
            kind = _COMMERCIAL_CYCLE[commercial_counter % 3]
            commercial_counter += 1
        else:
            raise ParseError(f"unknown building kind {kind_tag!r}", layer="buildings", feature=i)
        footprint = tuple(projection.to_xy(lon, lat) for lon, lat in ring)
        if polygon_area(footprint) <= 0.0:
            raise ParseError("polygon has zero area", layer="buildings", feature=i)
        if not polygon_is_simple(footprint):
            raise ParseError("polygon is self-intersecting", layer="buildings", feature=i)
        tags = {k: v for k, v in props.items() if k not in ("id", "kind")}
        buildings.append(Building(id=bid, kind=kind, footprint=footprint, source_tags=tags))
    return buildings


def _parse_units(features: list[dict], projection: Projection, buildings: dict[int, Building]) -> list[BuildingUnit]:
    units: list[BuildingUnit] = []
    seen: set[int] = set()
    for i, feat in enumerate(features):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        if geom.get("type") != "Point":
            raise ParseError(f"expected Point geometry, got {geom.get('type')}", layer="buildingUnits", feature=i)
        if "id" not in props or "building_id" not in props:
            raise ParseError("unit needs 'id' and 'building_id' properties", layer="buildingUnits", feature=i)
        uid = int(props["id"])
        bid = int(props["building_id"])
        if uid in seen:
            raise ParseError(f"duplicate unit id {uid}", layer="buildingUnits", feature=i)
        seen.add(uid)
        if bid not in buildings:
            raise ParseError(f"unit references unknown building {bid}", layer="buildingUnits", feature=i)
        lon, lat = geom["coordinates"][:2]
        x, y = projection.to_xy(lon, lat)
        units.append(BuildingUnit(id=uid, building_id=bid, kind=buildings[bid].kind, x=x, y=y))
    return units


def _build_walkway_graph(features: list[dict], projection: Projection, stats: dict) -> WalkwayGraph:
    nodes: list[Coord] = []
    exact: dict[Coord, int] = {}
    snap_cells: dict[tuple[int, int], list[int]] = {}
    snapped = 0

    def node_for(x: float, y: float) -> int:
        nonlocal snapped
        key = (x, y)
        nid = exact.get(key)
        if nid is not None:
            return nid
        cx = int(x // SNAP_TOLERANCE_M)
        cy = int(y // SNAP_TOLERANCE_M)
        for gx in (cx - 1, cx, cx + 1):
            for gy in (cy - 1, cy, cy + 1):
                for cand in snap_cells.get((gx, gy), ()):
                    nx, ny = nodes[cand]
                    if math.hypot(nx - x, ny - y) <= SNAP_TOLERANCE_M:
                        snapped += 1
                        exact[key] = cand
                        return cand
        nid = len(nodes)
        nodes.append((x, y))
        exact[key] = nid
        snap_cells.setdefault((cx, cy), []).append(nid)
        return nid

    edge_set: dict[tuple[int, int], float] = {}
    duplicate_edges = 0
    self_loops = 0
    for i, feat in enumerate(features):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "LineString":
            raise ParseError(f"expected LineString geometry, got {geom.get('type')}", layer="walkways", feature=i)
        coords = geom.get("coordinates") or []
        if len(coords) < 2:
            raise ParseError("LineString needs at least 2 vertices", layer="walkways", feature=i)
        prev = None
        for lon, lat in coords:
            x, y = projection.to_xy(lon, lat)
            nid = node_for(x, y)
            if prev is not None:
                if prev == nid:
                    self_loops += 1
                else:
                    key = (min(prev, nid), max(prev, nid))
                    if key in edge_set:
                        duplicate_edges += 1
                    else:
                        ax, ay = nodes[key[0]]
                        bx, by = nodes[key[1]]
                        edge_set[key] = math.hypot(bx - ax, by - ay)
            prev = nid

    # Drop isolated nodes and compact ids, preserving order.
    degree = [0] * len(nodes)
    for u, v in edge_set:
        degree[u] += 1
        degree[v] += 1
    keep = [i for i, d in enumerate(degree) if d > 0]
    isolated = len(nodes) - len(keep)
    remap = {old: new for new, old in enumerate(keep)}
    new_nodes = [nodes[i] for i in keep]
    edges = sorted((remap[u], remap[v], w) for (u, v), w in edge_set.items())

    stats["walkway_nodes"] = len(new_nodes)
    stats["walkway_edges"] = len(edges)
    stats["snapped_vertices"] = snapped
    stats["duplicate_edges_merged"] = duplicate_edges
    stats["self_loops_dropped"] = self_loops
    stats["isolated_nodes_removed"] = isolated
    return WalkwayGraph(new_nodes, edges)


def ingest_map(
    buildings_path: str,
    units_path: str | None,
    walkways_path: str,
    cfg: IngestConfig | None = None,
) -> WorldMap:
    """Build and validate a WorldMap from GeoJSON layers. See module docs."""
    cfg = cfg or IngestConfig()
    building_features = _load_feature_collection(buildings_path, "buildings")
    walkway_features = _load_feature_collection(walkways_path, "walkways")
    unit_features = _load_feature_collection(units_path, "buildingUnits") if units_path else None

    layers = [building_features, walkway_features]
    if unit_features:
        layers.append(unit_features)
    minlon, minlat, maxlon, maxlat = _lonlat_bounds(layers)
    projection = Projection(lon0=(minlon + maxlon) / 2.0, lat0=(minlat + maxlat) / 2.0)

    stats: dict = {}
    buildings = _parse_buildings(building_features, projection)
    by_id = {b.id: b for b in buildings}

    for kind in ALL_KINDS:
        if not any(b.kind == kind for b in buildings):
            raise MapError(f"map has zero buildings of required kind '{KIND_NAMES[kind]}'")

    if unit_features is not None:
        units = _parse_units(unit_features, projection, by_id)
        stats["units_source"] = "layer"
    else:
        units = []
        next_id = 0
        for b in buildings:
            created = subdivide_building(b, cfg.unit_area, start_id=next_id)
            units.extend(created)
            next_id += len(created)
        stats["units_source"] = "subdivision"

    # Economy draws in ascending creation order, one draw per unit.
    init_stream = derive_stream(cfg.seed, "init")
    priced: list[BuildingUnit] = []
    for u in units:
        rent = wage = meal = None
        if u.kind == RESIDENTIAL:
            rent = init_stream.randint(*cfg.rent_range)
        elif u.kind == WORKPLACE:
            wage = init_stream.randint(*cfg.wage_range)
        elif u.kind == RESTAURANT:
            meal = init_stream.randint(*cfg.meal_range)
        priced.append(
            BuildingUnit(
                id=u.id,
                building_id=u.building_id,
                kind=u.kind,
                x=u.x,
                y=u.y,
                rent_per_day=rent,
                wage_per_tick=wage,
                meal_price=meal,
            )
        )

    graph = _build_walkway_graph(walkway_features, projection, stats)
    if len(graph) == 0:
        raise MapError("walkway graph is empty")
    components = graph.component_sizes()
    if len(components) > 1:
        raise MapError("walkway graph is disconnected", components=components)

    world = WorldMap(buildings, priced, graph, projection, ingest_stats=stats)
    report = validate_map(world)
    if not report.ok:
        raise MapError("map validation failed: " + "; ".join(report.errors))
    return world


def validate_map(world: WorldMap, verify_anchors: bool = True) -> ValidationReport:
    """Structural validation; errors make the map unusable, warnings do not."""
    report = ValidationReport()
    report.component_sizes = world.graph.component_sizes()
    report.anchor_teleport_bound = world.anchor_teleport_bound

    if len(report.component_sizes) > 1:
        report.errors.append(
            f"walkway graph has {len(report.component_sizes)} components: {report.component_sizes}"
        )

    for kind in ALL_KINDS:
        if not world.unit_ids_by_kind[kind]:
            report.errors.append(f"no units of required kind '{KIND_NAMES[kind]}'")

    for u in world.unit_list:
        b = world.buildings.get(u.building_id)
        if b is None:
            report.errors.append(f"unit {u.id} references unknown building {u.building_id}")
            continue
        if not point_in_polygon(u.x, u.y, b.footprint, boundary_eps=1e-6):
            report.errors.append(f"unit {u.id} lies outside footprint of building {b.id}")
        if u.kind != b.kind:
            report.errors.append(f"unit {u.id} kind differs from building {b.id} kind")
        for val, label in ((u.rent_per_day, "rent"), (u.wage_per_tick, "wage"), (u.meal_price, "meal price")):
            if val is not None and val < 0:
                report.errors.append(f"unit {u.id} has negative {label}")

    for u, v, w in world.graph.edges:
        ax, ay = world.graph.nodes[u]
        bx, by = world.graph.nodes[v]
        if w < dist(ax, ay, bx, by) - _LENGTH_SLACK:
            report.errors.append(f"edge ({u},{v}) length {w} below Euclidean distance")

    if verify_anchors and world.unit_list and len(world.graph) > 0:
        bad = _brute_force_anchor_mismatches(world)
        for uid, expect in bad:
            report.errors.append(f"unit {uid} anchor {world.anchors[uid]} != brute-force nearest {expect}")

    stats = world.ingest_stats
    if stats.get("duplicate_edges_merged"):
        report.warnings.append(f"{stats['duplicate_edges_merged']} duplicate edges merged")
    if stats.get("self_loops_dropped"):
        report.warnings.append(f"{stats['self_loops_dropped']} self-loop segments dropped")
    if stats.get("isolated_nodes_removed"):
        report.warnings.append(f"{stats['isolated_nodes_removed']} isolated nodes removed")
    if stats.get("snapped_vertices"):
        report.warnings.append(f"{stats['snapped_vertices']} vertices snapped within {SNAP_TOLERANCE_M} m")
    return report


def _brute_force_anchor_mismatches(world: WorldMap) -> list[tuple[int, int]]:
    """Exhaustive nearest-node check for every unit (vectorized; ties -> min id)."""
    import numpy as np

    nodes = np.asarray(world.graph.nodes)  # (n, 2)
    mismatches: list[tuple[int, int]] = []
    units = world.unit_list
    chunk = 2048
    for lo in range(0, len(units), chunk):
        block = units[lo : lo + chunk]
        pts = np.asarray([(u.x, u.y) for u in block])  # (m, 2)
        d2 = ((pts[:, None, :] - nodes[None, :, :]) ** 2).sum(axis=2)
        winners = d2.argmin(axis=1)  # argmin returns the smallest index on ties
        for u, w in zip(block, winners):
            if world.anchors[u.id] != int(w):
                mismatches.append((u.id, int(w)))
    return mismatches


# ---------------------------------------------------------------------------
# Serialization (polmap/1)
# ---------------------------------------------------------------------------

MAP_FORMAT = "polmap/1"


def save_map(world: WorldMap, path: str) -> None:
    """Write the canonical byte-deterministic map document.

    Field order is fixed: format, projection, stats, buildings (by id:
    id, kind, footprint, tags), units (id, building, kind, x, y, econ),
    graph nodes then edges, anchors.
    """
    doc = {
        "format": MAP_FORMAT,
        "projection": {"lon0": world.projection.lon0, "lat0": world.projection.lat0},
        "stats": {k: world.ingest_stats[k] for k in sorted(world.ingest_stats)},
        "buildings": [
            {
                "id": b.id,
                "kind": KIND_NAMES[b.kind],
                "footprint": [[x, y] for x, y in b.footprint],
                "tags": {k: b.source_tags[k] for k in sorted(b.source_tags)},
            }
            for b in world.building_list
        ],
        "units": [
            {
                "id": u.id,
                "building": u.building_id,
                "kind": KIND_NAMES[u.kind],
                "x": u.x,
                "y": u.y,
                "rent": u.rent_per_day,
                "wage": u.wage_per_tick,
                "meal": u.meal_price,
            }
            for u in world.unit_list
        ],
        "graph": {
            "nodes": [[x, y] for x, y in world.graph.nodes],
            "edges": [[u, v, w] for u, v, w in world.graph.edges],
        },
        "anchors": [[u.id, world.anchors[u.id]] for u in world.unit_list],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, separators=(",", ":"))
        f.write("\n")


def load_map(path: str) -> WorldMap:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise MapError(f"cannot read map file {path}: {exc}") from exc
    if doc.get("format") != MAP_FORMAT:
        raise MapError(f"unsupported map format {doc.get('format')!r} (expected {MAP_FORMAT})")
    projection = Projection(lon0=doc["projection"]["lon0"], lat0=doc["projection"]["lat0"])
    buildings = [
        Building(
            id=b["id"],
            kind=KIND_BY_NAME[b["kind"]],
            footprint=tuple((x, y) for x, y in b["footprint"]),
            source_tags=b.get("tags", {}),
        )
        for b in doc["buildings"]
    ]
    units = [
        BuildingUnit(
            id=u["id"],
            building_id=u["building"],
            kind=KIND_BY_NAME[u["kind"]],
            x=u["x"],
            y=u["y"],
            rent_per_day=u["rent"],
            wage_per_tick=u["wage"],
            meal_price=u["meal"],
        )
        for u in doc["units"]
    ]
    graph = WalkwayGraph(
        [(x, y) for x, y in doc["graph"]["nodes"]],
        [(u, v, w) for u, v, w in doc["graph"]["edges"]],
    )
    world = WorldMap(buildings, units, graph, projection, ingest_stats=doc.get("stats", {}))
    # Stored anchors are authoritative; recomputation must agree.
    for uid, node in doc["anchors"]:
        if world.anchors.get(uid) != node:
            raise MapError(f"anchor mismatch for unit {uid} in {path}")
    return world
