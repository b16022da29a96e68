import json

import pytest

from transitnet.cli import run
from transitnet.coverage import PopulationMap, SampleConfig
from transitnet.ingest import load_pois, load_population, load_snapshot
from transitnet.network import find_bridges, prepare_network
from transitnet.report import build_city_report, dump_geojson, export_geojson, render_tables

SMALL = ["--samples", "300", "--poi-starts", "60"]


@pytest.fixture
def files(data_dir):
    return {k: str(data_dir / v) for k, v in {
        "tiny": "tiny_city.json", "city": "city20.json", "pop": "city20_population.csv",
        "pois": "city20_pois.csv"}.items()}


def test_build_writes_artifact_and_manifest(files, tmp_path):
    out = tmp_path / "net.json"
    assert run(["build", "--snapshot", files["tiny"], "--out", str(out)]) == 0
    feed = load_snapshot(out)
    assert [s.stop_id for s in feed.stops] == ["A", "B"]
    manifest = json.loads((tmp_path / "net.json.manifest.json").read_text())
    assert manifest["command"] == "build"
    assert len(manifest["inputs"]["snapshot"]["sha256"]) == 64
    assert manifest["merge_threshold_m"] == 30.0


def test_build_is_a_fixed_point(files, tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["build", "--snapshot", files["city"], "--out", str(first)]) == 0
    assert run(["build", "--snapshot", str(first), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_path_to_self(files, capsys):
    assert run(["path", "--snapshot", files["tiny"], "--from", "A", "--to", "A"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["transfers"] == 0 and row["total_time_sec"] == 0.0 and row["stops"] == ["A"]


def test_path_between_stops(files, capsys):
    assert run(["path", "--snapshot", files["tiny"], "--from", "A", "--to", "B", "--wait", "zero"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["total_time_sec"] == 240.0 and row["stops"] == ["A", "B"]


@pytest.mark.parametrize("argv, code", [
    (["path", "--snapshot", "{tiny}", "--from", "A", "--to", "Q"], 2),
    (["coverage", "--snapshot", "{tiny}", "--threads", "0"], 2),
    (["coverage", "--snapshot", "{tiny}", "--walk-threshold", "900"], 2),
    (["metrics", "--snapshot", "{tiny}", "--bogus"], 2),
    (["frobnicate"], 2),
    (["metrics", "--snapshot", "/nonexistent/city.json"], 1),
    (["report", "--snapshot", "{tiny}", "--population", "/nonexistent.csv"], 1),
    (["trips", "--snapshot", "{tiny}", "--source", "population"], 2),
])
def test_exit_codes(files, argv, code, capsys):
    argv = [a.format(**files) for a in argv]
    assert run(argv) == code
    err = capsys.readouterr().err
    assert "error" in err


def test_data_error_on_malformed_snapshot(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"city": "x", "stops": [], "routes": [], "extra": 1}')
    assert run(["metrics", "--snapshot", str(bad)]) == 1
    assert "extra" in capsys.readouterr().err


def test_report_matches_library(files, capsys):
    assert run(["report", "--snapshot", files["city"], "--population", files["pop"], "--pois", files["pois"],
                "--format", "json", *SMALL]) == 0
    cli_text = capsys.readouterr().out
    net = prepare_network(load_snapshot(files["city"]))
    pm = PopulationMap.from_regions(load_population(files["pop"]))
    cfg = SampleConfig(sample_count=300, poi_start_count=60)
    report = build_city_report(net, pm, load_pois(files["pois"]), cfg,
                               {"merge_threshold_m": 30.0, "default_speed_kmh": 18.0})
    assert cli_text == render_tables(report, "json")


def test_geojson_and_bridges_match_library(files, capsys):
    assert run(["export-geojson", "--snapshot", files["city"]]) == 0
    net = prepare_network(load_snapshot(files["city"]))
    assert capsys.readouterr().out == dump_geojson(export_geojson(net))
    assert run(["bridges", "--snapshot", files["city"]]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [(r["a"], r["b"]) for r in rows] == [c.key for c in find_bridges(net)]


def test_compare_two_reports(files, tmp_path, capsys):
    paths = []
    for seed in ("1", "2"):
        out = tmp_path / f"r{seed}.json"
        assert run(["report", "--snapshot", files["city"], "--population", files["pop"], "--seed", seed,
                    "--out", str(out), *SMALL]) == 0
        paths.append(out)
    doc = json.loads(paths[1].read_text())
    doc["city"] = "Second City"
    paths[1].write_text(json.dumps(doc))
    assert run(["compare", *map(str, paths), "--format", "csv"]) == 0
    header = capsys.readouterr().out.splitlines()[0]
    assert header == "metric,unit,direction,Fixture City,Second City,best,significant_digits"


def test_compare_incomparable(files, tmp_path, capsys):
    paths = []
    for name, walk in (("one", "400"), ("two", "300")):
        out = tmp_path / f"{name}.json"
        assert run(["report", "--snapshot", files["city"], "--population", files["pop"],
                    "--walk-threshold", walk, "--out", str(out), *SMALL]) == 0
        doc = json.loads(out.read_text())
        doc["city"] = name
        out.write_text(json.dumps(doc))
        paths.append(str(out))
    assert run(["compare", *paths]) == 1
    assert "walk_threshold_m" in capsys.readouterr().err


def test_seed_determines_output(files, capsys):
    base = ["coverage", "--snapshot", files["city"], "--population", files["pop"], "--samples", "500"]
    outs = []
    for seed in ("5", "5", "6"):
        assert run([*base, "--seed", seed]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1] != outs[2]


def test_csv_outputs(files, capsys):
    assert run(["metrics", "--snapshot", files["city"], "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("total_length_km,")
    assert len(lines) == 2
