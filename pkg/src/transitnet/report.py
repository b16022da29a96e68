"""Per-city reports, cross-city comparison tables, and GeoJSON export."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .coverage import (AREA, POPULATION, AccessResult, CoverageResult, PopulationMap, SampleConfig,
                       TripSummary, area_coverage, poi_access, population_coverage, trip_metrics)
from .errors import IncomparableReportsError, InvalidArgumentError
from .geodesy import WGS84, EarthModel
from .ingest import PointOfInterest
from .network import StructuralMetrics, TransitNetwork, find_bridges, structural_metrics

SCHEMA_VERSION = 1
SIG_DIGITS = 4

# Interpretation notes carried in every report so readers know the units.
REPORT_NOTES = {
    "per_connection_units": "mean_connection_time_sec in seconds, mean_connection_length_m in meters",
    "wait_time": "headway/2 per route, unweighted mean and population standard deviation over routes",
    "trip_sampling": "origin and destination drawn independently from the same point source",
    "trip_time": "walking + in-vehicle + boarding waits; transfer penalty excluded",
    "normalization": "per-km fields divide by mean straight-line origin-destination distance",
}


@dataclass(frozen=True)
class ConnectionSummary:
    mean_connection_time_sec: float
    mean_connection_length_m: float
    mean_wait_time_min: float
    wait_time_stddev_min: float


@dataclass(frozen=True)
class CityReport:
    city: str
    structural: StructuralMetrics
    area_trips: TripSummary
    population_trips: TripSummary
    area_coverage: CoverageResult
    population_coverage: CoverageResult
    per_connection: ConnectionSummary
    config_echo: Dict[str, Any]
    poi_access: Optional[AccessResult] = None

    def to_dict(self) -> Dict[str, Any]:
        def cov(c: CoverageResult) -> Dict[str, Any]:
            d = asdict(c)
            d.pop("config_echo")
            return d

        return {
            "schema_version": SCHEMA_VERSION,
            "city": self.city,
            "structural": asdict(self.structural),
            "area_trips": asdict(self.area_trips),
            "population_trips": asdict(self.population_trips),
            "area_coverage": cov(self.area_coverage),
            "population_coverage": cov(self.population_coverage),
            "per_connection": asdict(self.per_connection),
            "poi_access": None if self.poi_access is None else asdict(self.poi_access),
            "config_echo": self.config_echo,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "CityReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise InvalidArgumentError(f"unsupported report schema {d.get('schema_version')!r}")
        sample_keys = {f.name for f in fields(SampleConfig)}
        config = SampleConfig(**{k: v for k, v in d["config_echo"].items() if k in sample_keys})
        return cls(
            city=d["city"],
            structural=StructuralMetrics(**d["structural"]),
            area_trips=TripSummary(**d["area_trips"]),
            population_trips=TripSummary(**d["population_trips"]),
            area_coverage=CoverageResult(config_echo=config, **d["area_coverage"]),
            population_coverage=CoverageResult(config_echo=config, **d["population_coverage"]),
            per_connection=ConnectionSummary(**d["per_connection"]),
            config_echo=d["config_echo"],
            poi_access=None if d.get("poi_access") is None else AccessResult(**d["poi_access"]),
        )


def connection_summary(network: TransitNetwork) -> ConnectionSummary:
    conns = network.connections
    waits = [r.headway_min / 2.0 for r in network.routes.values()]
    return ConnectionSummary(
        mean_connection_time_sec=math.fsum(c.travel_time_sec for c in conns) / len(conns) if conns else 0.0,
        mean_connection_length_m=math.fsum(c.length_m for c in conns) / len(conns) if conns else 0.0,
        mean_wait_time_min=statistics.fmean(waits) if waits else 0.0,
        wait_time_stddev_min=statistics.pstdev(waits) if waits else 0.0,
    )


def build_city_report(network: TransitNetwork, popmap: PopulationMap,
                      pois: Optional[Sequence[PointOfInterest]], config: SampleConfig,
                      extra_config: Optional[Dict[str, Any]] = None, model: EarthModel = WGS84,
                      threads: Optional[int] = None) -> CityReport:
    """Run every metric family for one city.

    ``extra_config`` holds settings applied before this call (merge threshold,
    default speed) so the echo is complete.
    """
    echo: Dict[str, Any] = dict(asdict(config))
    echo.update(extra_config or {})
    echo["notes"] = dict(REPORT_NOTES)
    access = None
    if pois:
        access = poi_access(network, pois, config, POPULATION, popmap, model, threads)
    return CityReport(
        city=network.city,
        structural=structural_metrics(network, seed=config.seed),
        area_trips=trip_metrics(network, config, AREA, None, model, threads),
        population_trips=trip_metrics(network, config, POPULATION, popmap, model, threads),
        area_coverage=area_coverage(network, config, model, threads),
        population_coverage=population_coverage(network, popmap, config, model, threads),
        per_connection=connection_summary(network),
        config_echo=echo,
        poi_access=access,
    )


# -- comparison --------------------------------------------------------------

MIN, MAX, NEUTRAL = "min", "max", "none"

# (row key, unit, direction); the key is a dotted path into CityReport.to_dict().
METRICS: Tuple[Tuple[str, str, str], ...] = (
    ("structural.total_length_km", "km", MAX),
    ("structural.total_travel_time_h", "h", NEUTRAL),
    ("structural.mean_speed_kmh", "km/h", MAX),
    ("structural.stop_count", "count", MAX),
    ("structural.route_count", "count", MAX),
    ("structural.connected_pair_count", "count", MAX),
    ("structural.component_count", "count", MIN),
    ("structural.bridge_count", "count", MIN),
    ("structural.avg_shortest_path_hops", "hops", MIN),
    ("structural.avg_clustering", "ratio", NEUTRAL),
    ("area_trips.mean_trip_time_min", "min", MIN),
    ("area_trips.trip_time_per_straight_km_min", "min/km", MIN),
    ("area_trips.mean_trip_length_km", "km", NEUTRAL),
    ("area_trips.mean_transfers", "count", MIN),
    ("area_trips.transfers_per_straight_km", "1/km", MIN),
    ("area_trips.mean_straight_distance_km", "km", NEUTRAL),
    ("area_trips.trip_length_ratio", "ratio", MIN),
    ("area_coverage.mean_stops_within_threshold", "count", MAX),
    ("area_coverage.mean_distance_to_closest_stop_m", "m", MIN),
    ("population_trips.mean_trip_time_min", "min", MIN),
    ("population_trips.trip_time_per_straight_km_min", "min/km", MIN),
    ("population_trips.mean_trip_length_km", "km", NEUTRAL),
    ("population_trips.mean_transfers", "count", MIN),
    ("population_trips.transfers_per_straight_km", "1/km", MIN),
    ("population_trips.mean_straight_distance_km", "km", NEUTRAL),
    ("population_trips.trip_length_ratio", "ratio", MIN),
    ("population_coverage.mean_stops_within_threshold", "count", MAX),
    ("population_coverage.mean_distance_to_closest_stop_m", "m", MIN),
    ("per_connection.mean_connection_time_sec", "s", NEUTRAL),
    ("per_connection.mean_connection_length_m", "m", NEUTRAL),
    ("per_connection.mean_wait_time_min", "min", MIN),
    ("per_connection.wait_time_stddev_min", "min", MIN),
    ("poi_access.mean_access_time_min", "min", MIN),
    ("poi_access.mean_access_distance_km", "km", MIN),
)

# Echo entries allowed to differ between comparable reports.
_FREE_CONFIG = {"seed"}


@dataclass(frozen=True)
class ComparisonRow:
    metric: str
    unit: str
    direction: str
    values: Tuple[Optional[float], ...]
    best: Tuple[str, ...]


@dataclass(frozen=True)
class ComparisonTable:
    cities: Tuple[str, ...]
    rows: Tuple[ComparisonRow, ...]


def _lookup(d: Dict[str, Any], path: str) -> Optional[float]:
    cur: Any = d
    for part in path.split("."):
        if cur is None:
            return None
        cur = cur.get(part)
    return None if cur is None else float(cur)


def _best(cities: Sequence[str], values: Sequence[Optional[float]], direction: str) -> Tuple[str, ...]:
    present = [(v, c) for v, c in zip(values, cities) if v is not None and not math.isnan(v)]
    if direction == NEUTRAL or not present:
        return ()
    target = min(v for v, _ in present) if direction == MIN else max(v for v, _ in present)
    return tuple(c for v, c in present if v == target)


def _table(reports: Sequence[CityReport]) -> ComparisonTable:
    dicts = [r.to_dict() for r in reports]
    cities = tuple(r.city for r in reports)
    rows = []
    for key, unit, direction in METRICS:
        values = tuple(_lookup(d, key) for d in dicts)
        if all(v is None for v in values):
            continue
        rows.append(ComparisonRow(key, unit, direction, values, _best(cities, values, direction)))
    return ComparisonTable(cities, tuple(rows))


def compare_cities(reports: Sequence[CityReport]) -> ComparisonTable:
    """Side-by-side table with the best city marked per row. Rows tied at
    the optimum mark every tied city."""
    if len(reports) < 2:
        raise InvalidArgumentError("need at least two reports to compare")
    cities = [r.city for r in reports]
    if len(set(cities)) != len(cities):
        raise InvalidArgumentError("city names must be distinct")
    base = reports[0].config_echo
    differing = set()
    for r in reports[1:]:
        for k in set(base) | set(r.config_echo):
            if k not in _FREE_CONFIG and base.get(k) != r.config_echo.get(k):
                differing.add(k)
    if differing:
        raise IncomparableReportsError(differing)
    return _table(reports)


# -- rendering ---------------------------------------------------------------

def _fmt(v: Optional[float]) -> str:
    if v is None:
        return ""
    if math.isinf(v) or math.isnan(v):
        return str(v)
    return format(v, f".{SIG_DIGITS}g")


def _csv(table: ComparisonTable, with_best: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    header = ["metric", "unit", "direction", *table.cities]
    if with_best:
        header.append("best")
    header.append("significant_digits")
    w.writerow(header)
    for row in table.rows:
        out = [row.metric, row.unit, row.direction, *(_fmt(v) for v in row.values)]
        if with_best:
            out.append(";".join(row.best))
        out.append(str(SIG_DIGITS))
        w.writerow(out)
    return buf.getvalue()


def comparison_to_dict(table: ComparisonTable) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "cities": list(table.cities),
        "rows": [{"metric": r.metric, "unit": r.unit, "direction": r.direction,
                  "values": dict(zip(table.cities, r.values)), "best": list(r.best)}
                 for r in table.rows],
    }


def render_tables(obj: Union[CityReport, ComparisonTable], fmt: str = "csv") -> str:
    """CSV (4 significant digits) or JSON (full precision) text."""
    if fmt not in ("csv", "json"):
        raise InvalidArgumentError(f"unknown format {fmt!r}")
    if isinstance(obj, CityReport):
        if fmt == "json":
            return json.dumps(obj.to_dict(), indent=2) + "\n"
        return _csv(_table([obj]), with_best=False)
    if isinstance(obj, ComparisonTable):
        if fmt == "json":
            return json.dumps(comparison_to_dict(obj), indent=2) + "\n"
        return _csv(obj, with_best=True)
    raise InvalidArgumentError(f"cannot render {type(obj).__name__}")


# -- GeoJSON -----------------------------------------------------------------

def export_geojson(network: TransitNetwork, include_bridges: bool = True) -> Dict[str, Any]:
    """RFC 7946 FeatureCollection: a Point per stop, a LineString per
    connection, positions as [lon, lat]."""
    bridges = {c.key for c in find_bridges(network)} if include_bridges else set()
    features: List[Dict[str, Any]] = []
    for s in network.stops.values():
        features.append({
            "type": "Feature",
            "id": s.id,
            "geometry": {"type": "Point", "coordinates": [s.location.lon, s.location.lat]},
            "properties": {"id": s.id, "name": s.name, "routes": sorted(s.routes),
                           "merged_from": sorted(s.merged_from)},
        })
    for c in network.connections:
        pa, pb = network.stops[c.a].location, network.stops[c.b].location
        props: Dict[str, Any] = {"a": c.a, "b": c.b, "routes": sorted(c.routes),
                                 "straight_distance_m": c.straight_distance_m,
                                 "travel_time_sec": c.travel_time_sec}
        if c.road_distance_m is not None:
            props["road_distance_m"] = c.road_distance_m
        if include_bridges:
            props["bridge"] = c.key in bridges
        features.append({
            "type": "Feature",
            "id": f"{c.a}|{c.b}",
            "geometry": {"type": "LineString", "coordinates": [[pa.lon, pa.lat], [pb.lon, pb.lat]]},
            "properties": props,
        })
    return {"type": "FeatureCollection", "features": features}


def dump_geojson(doc: Dict[str, Any]) -> str:
    return json.dumps(doc, ensure_ascii=False) + "\n"
