"""Loading and validating city snapshots, population regions and POIs."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import (DanglingReferenceError, DataError, DuplicateIdError, InvalidArgumentError,
                     MalformedSnapshotError, RowError, ShortSequenceError, SnapshotNotFoundError)
from .geodesy import WGS84, EarthModel, GeoPoint, haversine_distance
from .model import Connection

logger = logging.getLogger(__name__)

DEFAULT_SPEED_KMH = 18.0
DEFAULT_REGION_SIDE_M = 1000.0

_TOP_KEYS = {"city", "stops", "routes"}
_STOP_KEYS = {"id", "name", "lat", "lon"}
_STOP_OPTIONAL = {"merged_from"}
_ROUTE_KEYS = {"id", "name", "headway_min", "directions"}
_DIRECTION_KEYS = {"stops"}
_DIRECTION_OPTIONAL = {"leg_times_sec", "leg_road_m", "name"}

POPULATION_COLUMNS = ("region_id", "name", "centroid_lat", "centroid_lon", "population", "area_km2")
POI_COLUMNS = ("poi_id", "name", "lat", "lon")


@dataclass(frozen=True)
class RawStop:
    stop_id: str
    name: str
    location: GeoPoint
    merged_from: Optional[Tuple[str, ...]] = None


@dataclass(frozen=True)
class RawDirection:
    stops: Tuple[str, ...]
    leg_times_sec: Optional[Tuple[float, ...]] = None
    leg_road_m: Optional[Tuple[float, ...]] = None
    name: Optional[str] = None


@dataclass(frozen=True)
class RawRoute:
    route_id: str
    name: str
    headway_min: float
    directions: Tuple[RawDirection, ...]


@dataclass(frozen=True)
class RawFeed:
    city_name: str
    stops: Tuple[RawStop, ...]
    routes: Tuple[RawRoute, ...]

    def stop_index(self) -> Dict[str, RawStop]:
        return {s.stop_id: s for s in self.stops}


@dataclass(frozen=True)
class PopulationRegion:
    region_id: str
    centroid: GeoPoint
    population: float
    side_m: float
    name: str = ""
    area_km2: Optional[float] = None

    def __post_init__(self):
        if not self.side_m > 0:
            raise InvalidArgumentError(f"region {self.region_id}: side must be positive")
        if not self.population >= 0:
            raise InvalidArgumentError(f"region {self.region_id}: negative population")


@dataclass(frozen=True)
class PointOfInterest:
    poi_id: str
    name: str
    location: GeoPoint


# -- snapshot JSON -----------------------------------------------------------

def _check_keys(obj: Any, required: set, optional: set, ctx: str) -> None:
    if not isinstance(obj, dict):
        raise MalformedSnapshotError("expected an object", ctx)
    missing = required - obj.keys()
    if missing:
        raise MalformedSnapshotError(f"missing field(s) {sorted(missing)}", ctx)
    unknown = obj.keys() - required - optional
    if unknown:
        raise MalformedSnapshotError(f"unknown field(s) {sorted(unknown)}", ctx)


def _number(value: Any, ctx: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise MalformedSnapshotError(f"expected a finite number, got {value!r}", ctx)
    return float(value)


def _text(value: Any, ctx: str) -> str:
    if not isinstance(value, str):
        raise MalformedSnapshotError(f"expected a string, got {value!r}", ctx)
    return value


def _number_list(value: Any, length: int, ctx: str, positive: bool) -> Tuple[float, ...]:
    if not isinstance(value, list):
        raise MalformedSnapshotError("expected a list", ctx)
    if len(value) != length:
        raise MalformedSnapshotError(f"expected {length} values, got {len(value)}", ctx)
    out = tuple(_number(v, f"{ctx}[{i}]") for i, v in enumerate(value))
    if any(v <= 0 if positive else v < 0 for v in out):
        raise MalformedSnapshotError("values must be positive" if positive else "values must be >= 0", ctx)
    return out


def parse_snapshot(doc: Any) -> RawFeed:
    """Validate a decoded snapshot document and build a RawFeed."""
    _check_keys(doc, _TOP_KEYS, set(), "$")
    city = _text(doc["city"], "city")
    if not isinstance(doc["stops"], list):
        raise MalformedSnapshotError("expected a list", "stops")
    if not isinstance(doc["routes"], list):
        raise MalformedSnapshotError("expected a list", "routes")

    stops: List[RawStop] = []
    seen: set = set()
    for i, s in enumerate(doc["stops"]):
        ctx = f"stops[{i}]"
        _check_keys(s, _STOP_KEYS, _STOP_OPTIONAL, ctx)
        sid = _text(s["id"], ctx + ".id")
        if sid in seen:
            raise DuplicateIdError(f"duplicate stop id {sid!r}", ctx)
        seen.add(sid)
        try:
            loc = GeoPoint(_number(s["lat"], ctx + ".lat"), _number(s["lon"], ctx + ".lon"))
        except InvalidArgumentError as exc:
            raise MalformedSnapshotError(str(exc), ctx) from None
        merged = None
        if "merged_from" in s:
            if not isinstance(s["merged_from"], list) or not s["merged_from"]:
                raise MalformedSnapshotError("expected a nonempty list", ctx + ".merged_from")
            merged = tuple(sorted(_text(m, ctx + ".merged_from") for m in s["merged_from"]))
        stops.append(RawStop(sid, _text(s["name"], ctx + ".name"), loc, merged))

    routes: List[RawRoute] = []
    route_ids: set = set()
    for i, r in enumerate(doc["routes"]):
        ctx = f"routes[{i}]"
        _check_keys(r, _ROUTE_KEYS, set(), ctx)
        rid = _text(r["id"], ctx + ".id")
        if rid in route_ids:
            raise DuplicateIdError(f"duplicate route id {rid!r}", ctx)
        route_ids.add(rid)
        headway = _number(r["headway_min"], ctx + ".headway_min")
        if headway <= 0:
            raise MalformedSnapshotError("headway must be positive", ctx + ".headway_min")
        if not isinstance(r["directions"], list) or not r["directions"]:
            raise MalformedSnapshotError("expected a nonempty list", ctx + ".directions")
        directions = []
        for j, d in enumerate(r["directions"]):
            dctx = f"{ctx}.directions[{j}]"
            _check_keys(d, _DIRECTION_KEYS, _DIRECTION_OPTIONAL, dctx)
            if not isinstance(d["stops"], list):
                raise MalformedSnapshotError("expected a list", dctx + ".stops")
            seq = tuple(_text(x, dctx + ".stops") for x in d["stops"])
            if len(seq) < 2:
                raise ShortSequenceError(f"sequence has {len(seq)} stop(s), need at least 2", dctx)
            for sid in seq:
                if sid not in seen:
                    raise DanglingReferenceError(sid, dctx)
            legs = len(seq) - 1
            times = _number_list(d["leg_times_sec"], legs, dctx + ".leg_times_sec", True) \
                if "leg_times_sec" in d else None
            road = _number_list(d["leg_road_m"], legs, dctx + ".leg_road_m", False) \
                if "leg_road_m" in d else None
            name = _text(d["name"], dctx + ".name") if "name" in d else None
            directions.append(RawDirection(seq, times, road, name))
        routes.append(RawRoute(rid, _text(r["name"], ctx + ".name"), headway, tuple(directions)))
    return RawFeed(city, tuple(stops), tuple(routes))


def load_snapshot(path) -> RawFeed:
    """Read a snapshot JSON file. Every failure is a DataError subclass."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise SnapshotNotFoundError(f"no such file: {path}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedSnapshotError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return parse_snapshot(doc)


def snapshot_to_dict(feed: RawFeed) -> Dict[str, Any]:
    stops = []
    for s in feed.stops:
        rec: Dict[str, Any] = {"id": s.stop_id, "name": s.name, "lat": s.location.lat, "lon": s.location.lon}
        if s.merged_from is not None:
            rec["merged_from"] = list(s.merged_from)
        stops.append(rec)
    routes = []
    for r in feed.routes:
        dirs = []
        for d in r.directions:
            rec = {"stops": list(d.stops)}
            if d.name is not None:
                rec["name"] = d.name
            if d.leg_times_sec is not None:
                rec["leg_times_sec"] = list(d.leg_times_sec)
            if d.leg_road_m is not None:
                rec["leg_road_m"] = list(d.leg_road_m)
            dirs.append(rec)
        routes.append({"id": r.route_id, "name": r.name, "headway_min": r.headway_min, "directions": dirs})
    return {"city": feed.city_name, "stops": stops, "routes": routes}


def dump_snapshot(feed: RawFeed) -> str:
    return json.dumps(snapshot_to_dict(feed), indent=2, ensure_ascii=False) + "\n"


# -- connections -------------------------------------------------------------

def derive_connections(feed: RawFeed, model: EarthModel = WGS84,
                       speed_kmh: float = DEFAULT_SPEED_KMH) -> List[Connection]:
    """One connection per unordered pair of consecutive stops in any route
    direction, sorted by endpoint ids.

    Route sets are unioned across traversals; when several traversals carry a
    leg time the smallest wins. Legs without a time get distance / speed.
    """
    if not speed_kmh > 0:
        raise InvalidArgumentError("speed must be positive")
    speed_ms = speed_kmh / 3.6
    index = feed.stop_index()
    acc: Dict[Tuple[str, str], list] = {}
    for route in feed.routes:
        for d in route.directions:
            for k, (u, v) in enumerate(zip(d.stops, d.stops[1:])):
                key = (u, v) if u <= v else (v, u)
                dist = haversine_distance(index[u].location, index[v].location, model)
                t = d.leg_times_sec[k] if d.leg_times_sec is not None else dist / speed_ms
                road = d.leg_road_m[k] if d.leg_road_m is not None else None
                entry = acc.get(key)
                if entry is None:
                    acc[key] = [{route.route_id}, dist, t, road]
                else:
                    entry[0].add(route.route_id)
                    entry[2] = min(entry[2], t)
                    if road is not None:
                        entry[3] = road if entry[3] is None else min(entry[3], road)
    out = []
    for (u, v), (routes, dist, t, road) in sorted(acc.items()):
        if dist == 0.0 and u != v:
            logger.warning("stops %s and %s share a location; keeping zero-length connection", u, v)
        out.append(Connection(u, v, frozenset(routes), dist, t, road))
    return out


def prune_isolated_stops(feed: RawFeed, connections: Sequence[Connection]) -> Tuple[RawFeed, List[Connection]]:
    """Drop stops that touch no connection, keeping the order of the rest."""
    used = set()
    for c in connections:
        used.add(c.a)
        used.add(c.b)
    kept = tuple(s for s in feed.stops if s.stop_id in used)
    if len(kept) == len(feed.stops):
        return feed, list(connections)
    logger.info("pruned %d isolated stop(s)", len(feed.stops) - len(kept))
    return RawFeed(feed.city_name, kept, feed.routes), list(connections)


# -- CSV inputs --------------------------------------------------------------

def _read_csv(path, allowed: Sequence[str], required: Sequence[str]) -> Iterable[Tuple[int, Dict[str, str]]]:
    path = os.fspath(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except FileNotFoundError:
        raise SnapshotNotFoundError(f"no such file: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("missing header row", path)
        header = [h.strip() for h in header]
        unknown = [h for h in header if h not in allowed]
        if unknown:
            raise DataError(f"unknown column(s) {unknown}", path)
        missing = [h for h in required if h not in header]
        if missing:
            raise DataError(f"missing column(s) {missing}", path)
        for row in reader:
            line = reader.line_num
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise RowError(f"expected {len(header)} fields, got {len(row)}", line)
            yield line, dict(zip(header, (cell.strip() for cell in row)))


def _float_cell(rec: Dict[str, str], col: str, line: int) -> float:
    try:
        v = float(rec[col])
    except ValueError:
        raise RowError(f"{col}: not a number: {rec[col]!r}", line) from None
    if not math.isfinite(v):
        raise RowError(f"{col}: not finite", line)
    return v


def _point_cells(rec: Dict[str, str], lat_col: str, lon_col: str, line: int) -> GeoPoint:
    try:
        return GeoPoint(_float_cell(rec, lat_col, line), _float_cell(rec, lon_col, line))
    except InvalidArgumentError as exc:
        raise RowError(str(exc), line) from None


def load_population(path, default_side_m: float = DEFAULT_REGION_SIDE_M) -> List[PopulationRegion]:
    """Regions as squares; side is sqrt(area_km2) km when the area is given."""
    regions = []
    ids = set()
    required = [c for c in POPULATION_COLUMNS if c != "area_km2"]
    for line, rec in _read_csv(path, POPULATION_COLUMNS, required):
        rid = rec["region_id"]
        if not rid:
            raise RowError("empty region_id", line)
        if rid in ids:
            raise RowError(f"duplicate region_id {rid!r}", line)
        ids.add(rid)
        centroid = _point_cells(rec, "centroid_lat", "centroid_lon", line)
        pop = _float_cell(rec, "population", line)
        if pop < 0:
            raise RowError(f"negative population {pop}", line)
        area = None
        side = default_side_m
        if rec.get("area_km2"):
            area = _float_cell(rec, "area_km2", line)
            if area <= 0:
                raise RowError(f"area_km2 must be positive, got {area}", line)
            side = math.sqrt(area) * 1000.0
        regions.append(PopulationRegion(rid, centroid, pop, side, rec["name"], area))
    if not sum(r.population for r in regions) > 0:
        raise DataError("total population must be positive", os.fspath(path))
    return regions


def load_pois(path) -> List[PointOfInterest]:
    pois = []
    ids = set()
    for line, rec in _read_csv(path, POI_COLUMNS, POI_COLUMNS):
        pid = rec["poi_id"]
        if not pid:
            raise RowError("empty poi_id", line)
        if pid in ids:
            raise RowError(f"duplicate poi_id {pid!r}", line)
        ids.add(pid)
        pois.append(PointOfInterest(pid, rec["name"], _point_cells(rec, "lat", "lon", line)))
    return pois


def dump_population(regions: Iterable[PopulationRegion]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(POPULATION_COLUMNS)
    for r in regions:
        area = "" if r.area_km2 is None else repr(r.area_km2)
        w.writerow([r.region_id, r.name, repr(r.centroid.lat), repr(r.centroid.lon), repr(r.population), area])
    return buf.getvalue()


def dump_pois(pois: Iterable[PointOfInterest]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(POI_COLUMNS)
    for p in pois:
        w.writerow([p.poi_id, p.name, repr(p.location.lat), repr(p.location.lon)])
    return buf.getvalue()
