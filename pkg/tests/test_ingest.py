import csv
import json
import random

import pytest

from oracles import random_transit_feed
from transitnet.errors import (DanglingReferenceError, DataError, DuplicateIdError, MalformedSnapshotError,
                               RowError, ShortSequenceError, SnapshotNotFoundError)
from transitnet.geodesy import GeoPoint, haversine_distance
from transitnet.ingest import (RawDirection, RawFeed, RawRoute, RawStop, derive_connections, dump_pois,
                               dump_population, dump_snapshot, load_pois, load_population, load_snapshot,
                               parse_snapshot, prune_isolated_stops, snapshot_to_dict)


def _doc(**over):
    doc = {
        "city": "Two",
        "stops": [{"id": "A", "name": "a", "lat": 43.65, "lon": -79.4},
                  {"id": "B", "name": "b", "lat": 43.66, "lon": -79.4}],
        "routes": [{"id": "1", "name": "one", "headway_min": 10, "directions": [{"stops": ["A", "B"]}]}],
    }
    doc.update(over)
    return doc


def test_minimal_snapshot(data_dir):
    feed = load_snapshot(data_dir / "tiny_city.json")
    assert feed.city_name == "Tinytown"
    assert [s.stop_id for s in feed.stops] == ["A", "B"]
    assert len(feed.routes) == 1
    assert feed.routes[0].directions[0] == RawDirection(("A", "B"), (240.0,))


def test_dangling_reference_names_stop():
    doc = _doc()
    doc["routes"][0]["directions"][0]["stops"] = ["A", "X"]
    with pytest.raises(DanglingReferenceError) as info:
        parse_snapshot(doc)
    assert info.value.missing_id == "X"
    assert "X" in str(info.value)


@pytest.mark.parametrize("mutate, error", [
    (lambda d: d["stops"].append(dict(d["stops"][0])), DuplicateIdError),
    (lambda d: d["routes"].append(dict(d["routes"][0])), DuplicateIdError),
    (lambda d: d["routes"][0]["directions"][0].update(stops=["A"]), ShortSequenceError),
    (lambda d: d["stops"][0].update(lat=95.0), MalformedSnapshotError),
    (lambda d: d["stops"][0].update(lat="north"), MalformedSnapshotError),
    (lambda d: d["stops"][0].update(extra=1), MalformedSnapshotError),
    (lambda d: d.pop("routes"), MalformedSnapshotError),
    (lambda d: d["routes"][0].update(headway_min=0), MalformedSnapshotError),
    (lambda d: d["routes"][0]["directions"][0].update(leg_times_sec=[1, 2]), MalformedSnapshotError),
    (lambda d: d["routes"][0]["directions"][0].update(leg_times_sec=[0]), MalformedSnapshotError),
])
def test_snapshot_schema_errors(mutate, error):
    doc = _doc()
    mutate(doc)
    with pytest.raises(error):
        parse_snapshot(doc)


def test_missing_and_unparsable_files(tmp_path):
    with pytest.raises(SnapshotNotFoundError):
        load_snapshot(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"city": "x",\n "stops": [}')
    with pytest.raises(MalformedSnapshotError) as info:
        load_snapshot(bad)
    assert "line 2" in str(info.value)


def test_ten_stop_fixture_golden_model(data_dir):
    feed = load_snapshot(data_dir / "ten_stops.json")
    lats = {"T01": 43.65, "T02": 43.65, "T03": 43.65, "T04": 43.65, "T05": 43.6545045, "T06": 43.659009,
            "T07": 43.6454955, "T08": 43.6545045, "T09": 43.6545045, "T10": 43.6545045}
    lons = {"T01": -79.4, "T02": -79.3937746, "T03": -79.3875492, "T04": -79.3813238, "T05": -79.3875492,
            "T06": -79.3875492, "T07": -79.3875492, "T08": -79.3813238, "T09": -79.3750984, "T10": -79.368873}
    expected = RawFeed("Tenville", tuple(
        RawStop(f"T{i:02d}", f"Stop {i:02d}", GeoPoint(lats[f"T{i:02d}"], lons[f"T{i:02d}"])) for i in range(1, 11)
    ), (
        RawRoute("R1", "King", 10.0, (RawDirection(("T01", "T02", "T03", "T04"), (90.0, 100.0, 110.0)),
                                      RawDirection(("T04", "T03", "T02", "T01"), (110.0, 100.0, 90.0)))),
        RawRoute("R2", "Bathurst", 15.0, (RawDirection(("T06", "T05", "T03", "T07")),)),
        RawRoute("R3", "Queen", 20.0, (RawDirection(("T03", "T04", "T08", "T09", "T10"),
                                                    (120.0, 150.0, 130.0, 140.0)),)),
    ))
    assert feed == expected


def test_derive_simple_sequence():
    feed = parse_snapshot(_doc(stops=_doc()["stops"] + [{"id": "C", "name": "c", "lat": 43.67, "lon": -79.4}],
                               routes=[{"id": "1", "name": "one", "headway_min": 10,
                                        "directions": [{"stops": ["A", "B", "C"]}]}]))
    conns = derive_connections(feed)
    assert [c.key for c in conns] == [("A", "B"), ("B", "C")]


def test_two_routes_share_connection():
    doc = _doc()
    doc["routes"].append({"id": "2", "name": "two", "headway_min": 5,
                          "directions": [{"stops": ["B", "A"], "leg_times_sec": [60]}]})
    conns = derive_connections(parse_snapshot(doc))
    assert len(conns) == 1
    assert conns[0].routes == frozenset({"1", "2"})
    # The timed traversal is faster than the speed-derived one.
    assert conns[0].travel_time_sec == 60.0


def test_derive_matches_pair_enumeration(data_dir):
    feed = load_snapshot(data_dir / "ten_stops.json")
    pairs = {}
    for r in feed.routes:
        for d in r.directions:
            for i in range(len(d.stops) - 1):
                pairs.setdefault(frozenset(d.stops[i:i + 2]), set()).add(r.route_id)
    conns = derive_connections(feed)
    assert {frozenset(c.key): set(c.routes) for c in conns} == pairs
    assert len(conns) == 9
    t = {c.key: c.travel_time_sec for c in conns}
    assert t[("T01", "T02")] == 90.0
    assert t[("T03", "T04")] == 110.0
    # Untimed legs default to distance at 18 km/h.
    loc = feed.stop_index()
    d = haversine_distance(loc["T05"].location, loc["T06"].location)
    assert t[("T05", "T06")] == pytest.approx(d / 5.0)


def test_derive_is_order_insensitive():
    rng = random.Random(8)
    for _ in range(20):
        feed = random_transit_feed(rng)
        shuffled = RawFeed(feed.city_name, tuple(rng.sample(feed.stops, len(feed.stops))),
                           tuple(rng.sample(feed.routes, len(feed.routes))))
        assert derive_connections(feed) == derive_connections(shuffled)


def test_zero_distance_pair_warns(caplog):
    doc = _doc()
    doc["stops"][1].update(lat=43.65)
    with caplog.at_level("WARNING"):
        conns = derive_connections(parse_snapshot(doc))
    assert conns[0].straight_distance_m == 0.0
    assert "share a location" in caplog.text


def test_prune_isolated():
    stops = tuple(RawStop(f"s{i:02d}", "", GeoPoint(43.6 + i * 0.001, -79.4)) for i in range(20))
    used = [s.stop_id for s in stops[:15]]
    feed = RawFeed("x", stops, (RawRoute("r", "r", 10.0, (RawDirection(tuple(used)),)),))
    pruned, conns = prune_isolated_stops(feed, derive_connections(feed))
    assert len(pruned.stops) == 15
    assert len(conns) == 14
    again, _ = prune_isolated_stops(pruned, conns)
    assert again is pruned


def test_population_loading(data_dir, tmp_path):
    one = tmp_path / "one.csv"
    one.write_text("region_id,name,centroid_lat,centroid_lon,population\nZ,Zed,43.7,-79.4,1000\n")
    [r] = load_population(one)
    assert r.population == 1000 and r.side_m == 1000.0

    four = tmp_path / "four.csv"
    four.write_text("region_id,name,centroid_lat,centroid_lon,population,area_km2\nZ,Zed,43.7,-79.4,10,4\n")
    assert load_population(four)[0].side_m == 2000.0

    regions = load_population(data_dir / "population96.csv")
    with open(data_dir / "population96.csv", newline="") as fh:
        column = sum(float(row["population"]) for row in csv.DictReader(fh))
    assert len(regions) == 96
    assert sum(r.population for r in regions) == column


@pytest.mark.parametrize("body, line", [
    ("Z,Zed,43.7,-79.4,-5\n", 2),
    ("Z,Zed,43.7,-79.4,1\nY,Why,43.7,-79.4,lots\n", 3),
    ("Z,Zed,43.7,-79.4\n", 2),
    ("Z,Zed,99,-79.4,1\n", 2),
])
def test_population_row_errors(tmp_path, body, line):
    f = tmp_path / "p.csv"
    f.write_text("region_id,name,centroid_lat,centroid_lon,population\n" + body)
    with pytest.raises(RowError) as info:
        load_population(f)
    assert info.value.row == line


def test_population_unknown_column(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("region_id,name,centroid_lat,centroid_lon,population,colour\n")
    with pytest.raises(DataError):
        load_population(f)


def test_pois(data_dir, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("poi_id,name,lat,lon\n")
    assert load_pois(empty) == []

    one = tmp_path / "one.csv"
    one.write_text("poi_id,name,lat,lon\nQ,Quay,43.6401234,-79.3809876\n")
    [p] = load_pois(one)
    assert (p.location.lat, p.location.lon) == (43.6401234, -79.3809876)
    again = tmp_path / "again.csv"
    again.write_text(dump_pois([p]))
    assert load_pois(again) == [p]

    pois = load_pois(data_dir / "pois50.csv")
    golden = json.loads((data_dir / "pois50_expected.json").read_text())
    assert [(p.poi_id, p.name, p.location.lat, p.location.lon) for p in pois] == \
        [(g["poi_id"], g["name"], g["lat"], g["lon"]) for g in golden]


def test_population_round_trip(data_dir, tmp_path):
    regions = load_population(data_dir / "population96.csv")
    f = tmp_path / "p.csv"
    f.write_text(dump_population(regions))
    assert load_population(f) == regions


def test_snapshot_round_trip(data_dir, tmp_path):
    for name in ("tiny_city.json", "ten_stops.json", "city20.json"):
        feed = load_snapshot(data_dir / name)
        out = tmp_path / name
        out.write_text(dump_snapshot(feed))
        assert load_snapshot(out) == feed
        assert snapshot_to_dict(load_snapshot(out)) == snapshot_to_dict(feed)
