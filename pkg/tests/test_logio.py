import json
import os

import pytest

from polsim import logio
from polsim.config import SimConfig, TICKS_PER_DAY
from polsim.engine import run
from polsim.errors import ProcError
from polsim.worldmap import load_map


@pytest.fixture(scope="module")
def sample_run(city_map_path, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("logio_run"))
    world = load_map(city_map_path)
    cfg = SimConfig(agents=12, seed=21, ticks=2 * TICKS_PER_DAY, out=out)
    run(cfg, world)
    return out


# --- writers -----------------------------------------------------------------


def test_writer_empty_batch_and_single_record(tmp_path):
    w = logio.open_writer("trajectory", str(tmp_path))
    assert logio.write_records(w, []) == 0
    line = logio.format_trajectory(1, 0, 1.5, -2.25, "AtUnit")
    assert logio.write_records(w, [line]) == 1
    w.close()
    content = open(os.path.join(str(tmp_path), "trajectory.tsv")).read()
    assert content == "poltraj/1\ttick\tagent\tx\ty\tstatus\n1\t0\t1.500000\t-2.250000\tAtUnit\n"


def test_writer_flushes_mid_stream(tmp_path):
    w = logio.open_writer("trajectory", str(tmp_path))
    path = os.path.join(str(tmp_path), "trajectory.tsv")
    header_size = os.path.getsize(path)
    for i in range(10_001):
        w.append(logio.format_trajectory(i, 0, 0.0, 0.0, "AtUnit"))
    # 10,001 records: at least one intermediate flush happened before close.
    assert os.path.getsize(path) > header_size
    w.close()
    assert w.count == 10_001


# --- round-trips ---------------------------------------------------------------


def test_parse_emit_round_trip_every_type(sample_run):
    for name, schema in logio.SCHEMAS.items():
        path = os.path.join(sample_run, schema.filename)
        original = open(path, encoding="utf-8").read()
        parsed_schema, records = logio.parse_log(path)
        assert parsed_schema.name == name
        assert logio.emit_log(name, records) == original


def test_round_trip_preserves_tricky_floats(tmp_path):
    records = [
        (1, 0, 0.0, -0.0, "AtUnit"),
        (2, 1, 123456.123456, -0.000001, "OnRoute"),
        (3, 2, 1e-7, 999999.9999994, "AtUnit"),
    ]
    text = logio.emit_log("trajectory", records)
    path = tmp_path / "t.tsv"
    path.write_text(text)
    _, parsed = logio.parse_log(str(path))
    assert logio.emit_log("trajectory", parsed) == text


# --- concat / split ---------------------------------------------------------------


def test_concat_single_run_adds_run_id_column(sample_run, tmp_path):
    merged = logio.concat_logs([sample_run], str(tmp_path / "merged"), run_ids=["r0"])
    for name, path in merged.items():
        schema = logio.SCHEMAS[name]
        lines = open(path).read().splitlines()
        original = open(os.path.join(sample_run, schema.filename)).read().splitlines()
        assert lines[0] == schema.tag + "\trun_id\t" + "\t".join(schema.columns)
        assert lines[1:] == ["r0\t" + line for line in original[1:]]


def test_concat_split_inverse(sample_run, city_map_path, tmp_path):
    # Second run with a different seed, then merge and split back.
    out2 = str(tmp_path / "run2")
    world = load_map(city_map_path)
    cfg = SimConfig(agents=12, seed=22, ticks=TICKS_PER_DAY, out=out2)
    run(cfg, world)
    merged_dir = str(tmp_path / "merged")
    merged = logio.concat_logs([sample_run, out2], merged_dir, run_ids=["a", "b"])

    body = lambda p: open(p).read().splitlines()[1:]
    for name, path in merged.items():
        fname = logio.SCHEMAS[name].filename
        assert len(body(path)) == len(body(os.path.join(sample_run, fname))) + len(body(os.path.join(out2, fname)))

    split_dir = str(tmp_path / "split")
    for name, path in merged.items():
        logio.split_merged(path, split_dir)
    for run_id, src in (("a", sample_run), ("b", out2)):
        for name, schema in logio.SCHEMAS.items():
            src_path = os.path.join(src, schema.filename)
            dst_path = os.path.join(split_dir, run_id, schema.filename)
            src_bytes = open(src_path, "rb").read()
            if len(src_bytes.splitlines()) == 1:
                # runs contribute nothing for empty logs; no split file appears
                assert not os.path.exists(dst_path) or open(dst_path, "rb").read() == src_bytes
            else:
                assert open(dst_path, "rb").read() == src_bytes


def test_concat_schema_mismatch_names_run(sample_run, tmp_path):
    bad_dir = tmp_path / "bad"
    bad_dir.mkdir()
    (bad_dir / "trajectory.tsv").write_text("polwrong/9\ttick\n1\t2\n")
    with pytest.raises(ProcError) as err:
        logio.concat_logs([sample_run, str(bad_dir)], str(tmp_path / "m"), run_ids=["good", "bad"])
    assert "bad" in str(err.value)


# --- downsample ----------------------------------------------------------------------


def test_downsample_identity_and_modular_filter(sample_run, tmp_path):
    src = os.path.join(sample_run, "trajectory.tsv")
    out1 = str(tmp_path / "k1.tsv")
    logio.downsample(src, out1, 1)
    assert open(out1, "rb").read() == open(src, "rb").read()

    out3 = str(tmp_path / "k3.tsv")
    kept = logio.downsample(src, out3, 3)
    _, records = logio.parse_log(out3)
    _, original = logio.parse_log(src)
    expected = [r for r in original if r[0] % 3 == 0]
    assert records == expected
    assert kept == len(expected)


def test_downsample_empty_file_keeps_header(tmp_path):
    src = tmp_path / "empty.tsv"
    src.write_text(logio.header_line(logio.SCHEMAS["trajectory"]))
    out = tmp_path / "out.tsv"
    logio.downsample(str(src), str(out), 5)
    assert out.read_text() == logio.header_line(logio.SCHEMAS["trajectory"])


# --- stats ---------------------------------------------------------------------------


def test_stats_zeros_for_empty_run(tmp_path):
    d = tmp_path / "empty_run"
    d.mkdir()
    text = logio.stats(str(d))
    assert "records.trajectory = 0" in text
    assert "distinct_agents = 0" in text
    assert "mean_trips_per_agent_per_day = 0.000000" in text


def test_stats_hand_traced_single_agent(tmp_path):
    d = tmp_path / "run"
    d.mkdir()
    # One agent, one day: 4 check-ins -> 3 trips/day.
    rows = [
        (10, 0, 5, 1, "workplace", 0.0, 0.0),
        (120, 0, 9, 2, "restaurant", 1.0, 1.0),
        (150, 0, 5, 1, "workplace", 0.0, 0.0),
        (270, 0, 3, 0, "residential", 2.0, 2.0),
    ]
    (d / "checkin.tsv").write_text(logio.emit_log("checkin", rows))
    text = logio.stats(str(d))
    assert "records.checkin = 4" in text
    assert "distinct_agents = 1" in text
    assert "days = 1" in text
    assert "mean_trips_per_agent_per_day = 3.000000" in text


def test_stats_degree_histogram_matches_social_recount(sample_run):
    from polsim.social import SocialGraph

    text = logio.stats(sample_run, friend_threshold=0.3)
    _, records = logio.parse_log(os.path.join(sample_run, "social.tsv"))
    if not records:
        assert "final_day_social_edges = 0" in text
        return
    last_day = max(r[0] for r in records)
    g = SocialGraph()
    agents = set()
    for day, a, b, w in records:
        if day == last_day:
            g._set(a, b, w)
    # distinct agents from logs: the state log covers all of them
    _, states = logio.parse_log(os.path.join(sample_run, "state.tsv"))
    agents = {r[1] for r in states}
    hist = g.degree_histogram(len(agents), 0.3)
    expected = ",".join(f"{d}:{c}" for d, c in hist)
    assert f"social_degree_histogram = {expected}" in text


def test_stats_missing_dir_raises(tmp_path):
    with pytest.raises(ProcError):
        logio.stats(str(tmp_path / "nope"))


# --- geojson export ---------------------------------------------------------------------


def test_export_geojson_features_and_round_trip(sample_run, tmp_path, city_world):
    out = str(tmp_path / "traj.geojson")
    n = logio.export_geojson(os.path.join(sample_run, "trajectory.tsv"), city_world, out, stride=12)
    doc = json.load(open(out))
    assert doc["type"] == "FeatureCollection"
    assert len(doc["features"]) == n == 12
    _, records = logio.parse_log(os.path.join(sample_run, "trajectory.tsv"))
    by_agent = {}
    for tick, agent, x, y, _s in records:
        if tick % 12 == 0:
            by_agent.setdefault(agent, []).append((x, y))
    for feature in doc["features"]:
        agent = feature["properties"]["agent"]
        coords = feature["geometry"]["coordinates"]
        assert len(coords) == len(by_agent[agent])
        # Inverse projection round-trips to the logged planar coordinates.
        for (lon, lat), (x, y) in zip(coords, by_agent[agent]):
            x2, y2 = city_world.projection.to_xy(lon, lat)
            assert abs(x2 - x) < 1e-6
            assert abs(y2 - y) < 1e-6


def test_export_geojson_empty_and_epoch(tmp_path, city_world):
    src = tmp_path / "empty.tsv"
    src.write_text(logio.header_line(logio.SCHEMAS["trajectory"]))
    out = str(tmp_path / "empty.geojson")
    assert logio.export_geojson(str(src), city_world, out) == 0
    assert json.load(open(out)) == {"type": "FeatureCollection", "features": []}

    src2 = tmp_path / "one.tsv"
    src2.write_text(logio.emit_log("trajectory", [(288, 0, 1.0, 2.0, "AtUnit")]))
    out2 = str(tmp_path / "one.geojson")
    logio.export_geojson(str(src2), city_world, out2, epoch="2024-01-01T00:00:00")
    doc = json.load(open(out2))
    assert doc["features"][0]["properties"]["times"] == ["2024-01-02T00:00:00"]
