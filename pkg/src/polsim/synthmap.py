"""Synthetic grid-city generator.

Produces the three GeoJSON layers (buildings, buildingUnits, walkways) for an
N x M block city with a Manhattan walkway grid, so benchmarks and tests never
depend on map downloads. Building kinds rotate round-robin in scan order;
footprint sizes get a seeded jitter so unit counts and rents vary.
"""

from __future__ import annotations

import json
import os

from .errors import ConfigError
from .geometry import Projection
from .rng import SplitMix64
from .worldmap import KIND_NAMES, ALL_KINDS, Building, subdivide_building

_ORIGIN = Projection(lon0=0.0, lat0=0.0)


def generate_grid_city(
    nx: int,
    ny: int,
    spacing: float = 50.0,
    seed: int = 0,
    unit_area: float = 100.0,
) -> dict[str, dict]:
    """Return {"buildings": ..., "buildingUnits": ..., "walkways": ...} FeatureCollections."""
    if nx < 2 or ny < 2:
        raise ConfigError("synthetic grid must be at least 2x2")
    if spacing <= 0:
        raise ConfigError("spacing must be positive")
    rng = SplitMix64(seed)

    building_features = []
    unit_features = []
    next_unit_id = 0
    for j in range(ny):
        for i in range(nx):
            bid = j * nx + i
            kind = ALL_KINDS[bid % 4]
            cx = (i + 0.5) * spacing
            cy = (j + 0.5) * spacing
            half = 0.5 * spacing * 0.6 * rng.uniform(0.85, 1.15)
            corners_m = [
                (cx - half, cy - half),
                (cx + half, cy - half),
                (cx + half, cy + half),
                (cx - half, cy + half),
            ]
            ring = [list(_ORIGIN.to_lonlat(x, y)) for x, y in corners_m]
            ring.append(ring[0])
            building_features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                    "properties": {"id": bid, "kind": KIND_NAMES[kind]},
                }
            )
            b = Building(id=bid, kind=kind, footprint=tuple(corners_m))
            for u in subdivide_building(b, unit_area, start_id=next_unit_id):
                unit_features.append(
                    {
                        "type": "Feature",
                        "geometry": {"type": "Point", "coordinates": list(_ORIGIN.to_lonlat(u.x, u.y))},
                        "properties": {"id": u.id, "building_id": bid},
                    }
                )
                next_unit_id += 1

    walkway_features = []
    for j in range(ny + 1):
        coords = [list(_ORIGIN.to_lonlat(i * spacing, j * spacing)) for i in range(nx + 1)]
        walkway_features.append(
            {"type": "Feature", "geometry": {"type": "LineString", "coordinates": coords}, "properties": {}}
        )
    for i in range(nx + 1):
        coords = [list(_ORIGIN.to_lonlat(i * spacing, j * spacing)) for j in range(ny + 1)]
        walkway_features.append(
            {"type": "Feature", "geometry": {"type": "LineString", "coordinates": coords}, "properties": {}}
        )

    return {
        "buildings": {"type": "FeatureCollection", "features": building_features},
        "buildingUnits": {"type": "FeatureCollection", "features": unit_features},
        "walkways": {"type": "FeatureCollection", "features": walkway_features},
    }


def write_layers(layers: dict[str, dict], out_dir: str) -> dict[str, str]:
    """Write the layer files; returns {layer name: path}."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name in ("buildings", "buildingUnits", "walkways"):
        path = os.path.join(out_dir, f"{name}.geojson")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(layers[name], f, separators=(",", ":"))
            f.write("\n")
        paths[name] = path
    return paths


def parse_grid_spec(text: str) -> tuple[int, int]:
    """Parse '10x12' style grid dimensions."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"bad grid spec {text!r}, expected NxM")
    try:
        nx, ny = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {text!r}, expected NxM") from exc
    return nx, ny
