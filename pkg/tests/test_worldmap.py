import heapq
import json
import math

import pytest

from conftest import (
    building_feature,
    square,
    toy_layer_paths,
    unit_feature,
    walkway_feature,
    write_geojson,
)
from polsim.errors import MapError, ParseError
from polsim.geometry import point_in_polygon, polygon_area
from polsim.rng import SplitMix64
from polsim.worldmap import (
    ALL_KINDS,
    RECREATION,
    RESIDENTIAL,
    RESTAURANT,
    WORKPLACE,
    Building,
    IngestConfig,
    UniformGridIndex,
    WalkwayGraph,
    euclidean_nearest_unit,
    ingest_map,
    load_map,
    nearest_node,
    network_nearest_unit,
    save_map,
    subdivide_building,
    validate_map,
)


def dijkstra_oracle(adj, source, n):
    dist = [math.inf] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            if d + w < dist[v]:
                dist[v] = d + w
                heapq.heappush(heap, (d + w, v))
    return dist


# --- ingestion -------------------------------------------------------------


def test_toy_map_round_trip(tmp_path, toy_world):
    assert len(toy_world.building_list) == 4
    kinds = {b.kind for b in toy_world.building_list}
    assert kinds == set(ALL_KINDS)
    expected_units = sum(
        max(1, int(polygon_area(b.footprint) / 100.0)) for b in toy_world.building_list
    )
    assert len(toy_world.unit_list) == expected_units
    assert all(uid in toy_world.anchors for uid in toy_world.units)


def test_degenerate_polygon_rejected(tmp_path):
    features = [
        {
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [[[0.0, 0.0], [0.001, 0.0], [0.0, 0.0]]]},
            "properties": {"id": 0, "kind": "residential"},
        }
    ]
    bpath = write_geojson(tmp_path / "b.geojson", features)
    wpath = write_geojson(tmp_path / "w.geojson", [walkway_feature([(0, 0), (10, 0)])])
    with pytest.raises(ParseError) as err:
        ingest_map(bpath, None, wpath)
    assert err.value.feature == 0


def test_disconnected_walkways_report_component_sizes(tmp_path):
    buildings = [
        building_feature(0, "residential", square(0, 0, 10)),
        building_feature(1, "workplace", square(50, 0, 10)),
        building_feature(2, "restaurant", square(0, 50, 10)),
        building_feature(3, "recreation", square(50, 50, 10)),
    ]
    # Two disjoint squares, 4 nodes each.
    walkways = [
        walkway_feature([(0, 0), (30, 0), (30, 30), (0, 30), (0, 0)]),
        walkway_feature([(500, 500), (530, 500), (530, 530), (500, 530), (500, 500)]),
    ]
    bpath = write_geojson(tmp_path / "b.geojson", buildings)
    wpath = write_geojson(tmp_path / "w.geojson", walkways)
    with pytest.raises(MapError) as err:
        ingest_map(bpath, None, wpath)
    assert err.value.components == [4, 4]


def test_missing_kind_rejected(tmp_path):
    buildings = [
        building_feature(0, "residential", square(0, 0, 10)),
        building_feature(1, "workplace", square(50, 0, 10)),
        building_feature(2, "restaurant", square(0, 50, 10)),
    ]
    bpath = write_geojson(tmp_path / "b.geojson", buildings)
    wpath = write_geojson(tmp_path / "w.geojson", [walkway_feature([(0, 0), (50, 0), (50, 50), (0, 0)])])
    with pytest.raises(MapError) as err:
        ingest_map(bpath, None, wpath)
    assert "recreation" in str(err.value)


def test_commercial_kind_round_robin(tmp_path):
    buildings = [building_feature(0, "residential", square(0, 0, 10))]
    for i in range(1, 7):
        buildings.append(building_feature(i, "commercial", square(60 * i, 0, 10)))
    bpath = write_geojson(tmp_path / "b.geojson", buildings)
    wpath = write_geojson(tmp_path / "w.geojson", [walkway_feature([(0, 0), (400, 0)])])
    world = ingest_map(bpath, None, wpath)
    kinds = [world.buildings[i].kind for i in range(1, 7)]
    assert kinds == [WORKPLACE, RESTAURANT, RECREATION, WORKPLACE, RESTAURANT, RECREATION]


def test_explicit_units_layer_and_outside_unit_rejected(tmp_path):
    units = [
        unit_feature(0, 0, (0, 0)),
        unit_feature(1, 1, (200, 0)),
        unit_feature(2, 2, (0, 200)),
        unit_feature(3, 3, (200, 200)),
    ]
    bpath, upath, wpath = toy_layer_paths(tmp_path, units=units)
    world = ingest_map(bpath, upath, wpath)
    assert len(world.unit_list) == 4
    assert world.units[0].kind == RESIDENTIAL

    bad_units = units[:3] + [unit_feature(3, 3, (600, 600))]  # outside footprint
    write_geojson(tmp_path / "units.geojson", bad_units)
    with pytest.raises(MapError) as err:
        ingest_map(bpath, upath, wpath)
    assert "unit 3" in str(err.value)


def test_duplicate_edges_merged_with_warning(tmp_path):
    bpath, _, wpath = toy_layer_paths(tmp_path)
    # Re-write walkways with the loop twice -> duplicate edges.
    loop = [(0, 0), (200, 0), (200, 200), (0, 200), (0, 0)]
    write_geojson(tmp_path / "walkways.geojson", [walkway_feature(loop), walkway_feature(loop)])
    world = ingest_map(bpath, None, wpath)
    assert world.ingest_stats["duplicate_edges_merged"] == 4
    assert len(world.graph.edges) == 4
    report = validate_map(world)
    assert report.ok
    assert any("duplicate" in w for w in report.warnings)


def test_ingest_bytes_deterministic(tmp_path):
    bpath, _, wpath = toy_layer_paths(tmp_path)
    cfg = IngestConfig(seed=77)
    out1 = tmp_path / "m1.polmap"
    out2 = tmp_path / "m2.polmap"
    save_map(ingest_map(bpath, None, wpath, cfg), str(out1))
    save_map(ingest_map(bpath, None, wpath, cfg), str(out2))
    assert out1.read_bytes() == out2.read_bytes()
    # Different seed changes the economy draws.
    out3 = tmp_path / "m3.polmap"
    save_map(ingest_map(bpath, None, wpath, IngestConfig(seed=78)), str(out3))
    assert out1.read_bytes() != out3.read_bytes()


def test_save_load_round_trip(tmp_path, toy_world):
    path = tmp_path / "map.polmap"
    save_map(toy_world, str(path))
    loaded = load_map(str(path))
    assert loaded.anchors == toy_world.anchors
    assert loaded.graph.edges == toy_world.graph.edges
    assert [u.id for u in loaded.unit_list] == [u.id for u in toy_world.unit_list]
    assert loaded.units[0].rent_per_day == toy_world.units[0].rent_per_day
    # Re-serialization is byte-stable.
    path2 = tmp_path / "map2.polmap"
    save_map(loaded, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_economy_draw_replay(tmp_path, toy_world):
    """Rent/wage/meal values replay from the documented init-stream order."""
    from polsim.rng import derive_stream

    stream = derive_stream(11, "init")
    cfg = IngestConfig(seed=11)
    for u in toy_world.unit_list:
        if u.kind == RESIDENTIAL:
            assert u.rent_per_day == stream.randint(*cfg.rent_range)
        elif u.kind == WORKPLACE:
            assert u.wage_per_tick == stream.randint(*cfg.wage_range)
        elif u.kind == RESTAURANT:
            assert u.meal_price == stream.randint(*cfg.meal_range)


# --- subdivision -----------------------------------------------------------


def test_subdivide_small_building_single_unit_at_centroid():
    b = Building(id=0, kind=RESIDENTIAL, footprint=tuple(square(4, 4, 4)))
    units = subdivide_building(b, 100.0)
    assert len(units) == 1
    assert (units[0].x, units[0].y) == (4.0, 4.0)


def test_subdivide_rectangle_floor_area_ratio():
    rect = ((0.0, 0.0), (40.0, 0.0), (40.0, 25.0), (0.0, 25.0))
    b = Building(id=1, kind=WORKPLACE, footprint=rect)
    units = subdivide_building(b, 100.0)
    assert len(units) == 10  # floor(1000 / 100)
    for u in units:
        assert point_in_polygon(u.x, u.y, rect)
    assert len({(u.x, u.y) for u in units}) == 10


def test_subdivide_inherits_kind_and_ids_sequential():
    b = Building(id=2, kind=RESTAURANT, footprint=tuple(square(0, 0, 20)))
    units = subdivide_building(b, 150.0, start_id=100)
    assert [u.id for u in units] == list(range(100, 100 + len(units)))
    assert all(u.kind == RESTAURANT for u in units)
    assert all(u.building_id == 2 for u in units)


def test_subdivide_concave_falls_back_inside():
    # L-shape whose bbox center is outside the polygon.
    ell = ((0.0, 0.0), (30.0, 0.0), (30.0, 10.0), (10.0, 10.0), (10.0, 30.0), (0.0, 30.0))
    b = Building(id=3, kind=RESIDENTIAL, footprint=ell)
    units = subdivide_building(b, 100.0)
    assert len(units) == max(1, int(polygon_area(ell) / 100.0))
    for u in units:
        assert point_in_polygon(u.x, u.y, ell)


# --- nearest queries -------------------------------------------------------


def test_nearest_node_exact_hit_and_tie_break():
    nodes = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)]
    g = WalkwayGraph(nodes, [(0, 1, 10.0), (1, 3, 10.0), (3, 2, 10.0), (2, 0, 10.0)])
    assert nearest_node(g, (10.0, 0.0)) == 1
    # Equidistant between nodes 0..3 -> smallest id wins.
    assert nearest_node(g, (5.0, 5.0)) == 0


def d2(ax, ay, bx, by):
    """Canonical squared distance: the ordering both index and oracles use."""
    dx = bx - ax
    dy = by - ay
    return dx * dx + dy * dy


def test_nearest_node_matches_brute_force_on_random_sets():
    rng = SplitMix64(42)
    for _ in range(30):
        n = 5 + rng.randrange(45)
        nodes = [(rng.uniform(-500, 500), rng.uniform(-500, 500)) for _ in range(n)]
        g = WalkwayGraph(nodes, [(i, (i + 1) % n, 2000.0) for i in range(n)])
        for _ in range(20):
            p = (rng.uniform(-600, 600), rng.uniform(-600, 600))
            expected = min(range(n), key=lambda i: (d2(nodes[i][0], nodes[i][1], p[0], p[1]), i))
            assert nearest_node(g, p) == expected


def test_grid_index_knn_matches_linear_scan():
    rng = SplitMix64(7)
    pts = [(i, rng.uniform(0, 1000), rng.uniform(0, 1000)) for i in range(300)]
    index = UniformGridIndex(pts, 50.0)
    for _ in range(500):
        qx, qy = rng.uniform(-100, 1100), rng.uniform(-100, 1100)
        k = 1 + rng.randrange(8)
        expected = sorted((d2(x, y, qx, qy), pid) for pid, x, y in pts)[:k]
        assert index.nearest(qx, qy, k) == [(math.sqrt(dd), pid) for dd, pid in expected]


def test_euclidean_nearest_unit_matches_linear_scan(city_world):
    rng = SplitMix64(13)
    units = city_world.unit_list
    for _ in range(1000):
        p = (rng.uniform(-300, 800), rng.uniform(-300, 800))
        kind = ALL_KINDS[rng.randrange(4)]
        k = 1 + rng.randrange(5)
        expected = sorted(
            (d2(u.x, u.y, p[0], p[1]), u.id) for u in units if u.kind == kind
        )[:k]
        assert euclidean_nearest_unit(city_world, p, kind, k) == [pid for _, pid in expected]


def test_euclidean_nearest_unit_truncates_and_single_candidate(toy_world):
    restaurants = toy_world.unit_ids_by_kind[RESTAURANT]
    got = euclidean_nearest_unit(toy_world, (-1000.0, -1000.0), RESTAURANT, len(restaurants) + 10)
    assert sorted(got) == restaurants


def test_network_nearest_unit_dijkstra_oracle(tmp_path):
    """Wall-shaped detour: Euclidean and network answers differ."""
    buildings = [
        building_feature(0, "residential", square(0, 0, 5)),
        building_feature(1, "workplace", square(100, 0, 5)),
        building_feature(2, "restaurant", square(30, 0, 5)),  # near in space, far on network
        building_feature(3, "restaurant", square(0, 60, 5)),  # farther in space, near on network
        building_feature(4, "recreation", square(100, 60, 5)),
    ]
    walkways = [
        walkway_feature([(0, 0), (0, 60), (100, 60), (100, 0)]),
        # long detour to reach the close-by restaurant
        walkway_feature([(0, 0), (-200, 0), (-200, -200), (30, -200), (30, 0)]),
    ]
    bpath = write_geojson(tmp_path / "b.geojson", buildings)
    wpath = write_geojson(tmp_path / "w.geojson", walkways)
    world = ingest_map(bpath, None, wpath)

    res_unit = world.unit_ids_by_kind[RESIDENTIAL][0]
    from_node = world.anchors[res_unit]
    euclid = euclidean_nearest_unit(world, world.unit_location(res_unit), RESTAURANT, 1)[0]
    network = network_nearest_unit(world, from_node, RESTAURANT)
    assert world.units[euclid].building_id == 2
    assert world.units[network].building_id == 3

    # Full-distances oracle agrees.
    dist = dijkstra_oracle(world.graph.adj, from_node, len(world.graph))
    expected = min(
        world.unit_ids_by_kind[RESTAURANT], key=lambda uid: (dist[world.anchors[uid]], uid)
    )
    assert network == expected


def test_network_nearest_unit_anchored_at_source(toy_world):
    uid = toy_world.unit_ids_by_kind[RECREATION][0]
    node = toy_world.anchors[uid]
    got = network_nearest_unit(toy_world, node, RECREATION)
    dist = dijkstra_oracle(toy_world.graph.adj, node, len(toy_world.graph))
    expected = min(toy_world.unit_ids_by_kind[RECREATION], key=lambda u: (dist[toy_world.anchors[u]], u))
    assert got == expected


# --- validation ------------------------------------------------------------


def test_validate_clean_map_no_errors(toy_world):
    report = validate_map(toy_world)
    assert report.ok
    assert report.component_sizes == [4]
    assert report.anchor_teleport_bound > 0.0


def test_anchors_match_brute_force(city_world):
    import numpy as np

    nodes = np.asarray(city_world.graph.nodes)
    for u in city_world.unit_list:
        d2 = ((nodes - np.array([u.x, u.y])) ** 2).sum(axis=1)
        assert city_world.anchors[u.id] == int(d2.argmin())


def test_validate_report_renders(toy_world):
    text = validate_map(toy_world).render()
    assert text.startswith("polvalidate/1\n")
    assert "errors = 0" in text
