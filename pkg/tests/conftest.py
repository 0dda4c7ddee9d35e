import json
import os

import pytest

from polsim.geometry import Projection
from polsim.synthmap import generate_grid_city, write_layers
from polsim.worldmap import IngestConfig, ingest_map

_ORIGIN = Projection(lon0=0.0, lat0=0.0)


def meters_ring(corners):
    """Closed lon/lat ring from meter-space corner coordinates."""
    ring = [list(_ORIGIN.to_lonlat(x, y)) for x, y in corners]
    ring.append(ring[0])
    return ring


def building_feature(bid, kind, corners):
    return {
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [meters_ring(corners)]},
        "properties": {"id": bid, "kind": kind},
    }


def walkway_feature(points_m):
    return {
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": [list(_ORIGIN.to_lonlat(x, y)) for x, y in points_m]},
        "properties": {},
    }


def unit_feature(uid, bid, xy_m):
    return {
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": list(_ORIGIN.to_lonlat(*xy_m))},
        "properties": {"id": uid, "building_id": bid},
    }


def write_geojson(path, features):
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"type": "FeatureCollection", "features": features}, f)
    return str(path)


def square(cx, cy, half):
    return [(cx - half, cy - half), (cx + half, cy - half), (cx + half, cy + half), (cx - half, cy + half)]


def toy_layer_paths(tmp_path, units=None):
    """Four buildings (one of each kind) on a square walkway loop.

    Layout (meters): residential at (0,0), workplace at (200,0),
    restaurant at (0,200), recreation at (200,200); walkways on the
    square through the building centers plus connecting spurs.
    """
    buildings = [
        building_feature(0, "residential", square(0, 0, 10)),
        building_feature(1, "workplace", square(200, 0, 10)),
        building_feature(2, "restaurant", square(0, 200, 10)),
        building_feature(3, "recreation", square(200, 200, 10)),
    ]
    walkways = [
        walkway_feature([(0, 0), (200, 0), (200, 200), (0, 200), (0, 0)]),
    ]
    bpath = write_geojson(tmp_path / "buildings.geojson", buildings)
    wpath = write_geojson(tmp_path / "walkways.geojson", walkways)
    upath = None
    if units is not None:
        upath = write_geojson(tmp_path / "units.geojson", units)
    return bpath, upath, wpath


@pytest.fixture
def toy_world(tmp_path):
    bpath, _, wpath = toy_layer_paths(tmp_path)
    return ingest_map(bpath, None, wpath, IngestConfig(seed=11))


@pytest.fixture(scope="session")
def city_map_path(tmp_path_factory):
    """10x10 synthetic city ingested once per test session."""
    from polsim.worldmap import save_map

    out = tmp_path_factory.mktemp("city10")
    layers = generate_grid_city(10, 10, spacing=50.0, seed=5)
    paths = write_layers(layers, str(out))
    world = ingest_map(paths["buildings"], paths["buildingUnits"], paths["walkways"], IngestConfig(seed=5))
    map_path = os.path.join(str(out), "map.polmap")
    save_map(world, map_path)
    return map_path


@pytest.fixture(scope="session")
def city_world(city_map_path):
    from polsim.worldmap import load_map

    return load_map(city_map_path)
