"""Great-circle distances on a latitude-dependent Earth radius, plus a
uniform lat/lon grid for radius queries around a point."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .errors import InvalidArgumentError, UnsupportedRegionError

# Relative padding applied to candidate boxes so that stops sitting exactly on
# the query circle are never dropped by the box prefilter.
_BOX_PAD = 1e-6
_DEG = math.pi / 180.0


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidArgumentError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise InvalidArgumentError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise InvalidArgumentError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class EarthModel:
    equatorial_radius_m: float = 6_378_137.0
    polar_radius_m: float = 6_356_752.0

    def __post_init__(self):
        if not 0 < self.polar_radius_m < self.equatorial_radius_m:
            raise InvalidArgumentError("need 0 < polar radius < equatorial radius")


WGS84 = EarthModel()


@dataclass(frozen=True)
class GeoBounds:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise InvalidArgumentError(f"inverted bounds {self}")

    def contains(self, p: GeoPoint) -> bool:
        return (self.min_lat <= p.lat <= self.max_lat
                and self.min_lon <= p.lon <= self.max_lon)


def _radius(phi: float, a: float, b: float) -> float:
    c, s = math.cos(phi), math.sin(phi)
    num = (a * a * c) ** 2 + (b * b * s) ** 2
    den = (a * c) ** 2 + (b * s) ** 2
    return math.sqrt(num / den)


def earth_radius(lat: float, model: EarthModel = WGS84) -> float:
    """Geocentric radius in meters at geodetic latitude ``lat`` (degrees)."""
    if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
        raise InvalidArgumentError(f"latitude {lat} outside [-90, 90]")
    return _radius(math.radians(lat), model.equatorial_radius_m, model.polar_radius_m)


def _hav(theta: float) -> float:
    return math.sin(theta / 2.0) ** 2


def haversine_distance(p1: GeoPoint, p2: GeoPoint, model: EarthModel = WGS84) -> float:
    """Distance in meters between two points on a sphere whose radius is the
    geocentric radius at the mean latitude of the endpoints. Elevation is
    taken as zero."""
    if type(p1) is not GeoPoint or type(p2) is not GeoPoint:
        if not isinstance(p1, GeoPoint) or not isinstance(p2, GeoPoint):
            raise InvalidArgumentError("haversine_distance expects GeoPoint arguments")
    if p1.lat == p2.lat and p1.lon == p2.lon:
        return 0.0
    phi1, phi2 = math.radians(p1.lat), math.radians(p2.lat)
    h = _hav(phi2 - phi1) + math.cos(phi1) * math.cos(phi2) * _hav(math.radians(p2.lon - p1.lon))
    r = _radius((phi1 + phi2) / 2.0, model.equatorial_radius_m, model.polar_radius_m)
    return 2.0 * r * math.asin(math.sqrt(min(1.0, h)))


def meters_per_degree_lat(lat: float, model: EarthModel = WGS84) -> float:
    return earth_radius(lat, model) * math.pi / 180.0


def bounding_square(center: GeoPoint, half_side_m: float, model: EarthModel = WGS84) -> GeoBounds:
    """Lat/lon box extending ``half_side_m`` north, south, east and west of
    ``center``.

    Raises UnsupportedRegionError if the box would cross a pole or the
    antimeridian.
    """
    if not (math.isfinite(half_side_m) and half_side_m >= 0):
        raise InvalidArgumentError(f"half side must be >= 0, got {half_side_m}")
    dlat = half_side_m / meters_per_degree_lat(center.lat, model)
    cos_lat = math.cos(math.radians(center.lat))
    if half_side_m > 0 and cos_lat <= 0:
        raise UnsupportedRegionError("square centered on a pole")
    dlon = dlat / cos_lat if half_side_m > 0 else 0.0
    lo_lat, hi_lat = center.lat - dlat, center.lat + dlat
    lo_lon, hi_lon = center.lon - dlon, center.lon + dlon
    if lo_lat < -90 or hi_lat > 90:
        raise UnsupportedRegionError(f"square around {center} crosses a pole")
    if lo_lon < -180 or hi_lon > 180:
        raise UnsupportedRegionError(f"square around {center} crosses the antimeridian")
    return GeoBounds(lo_lat, hi_lat, lo_lon, hi_lon)


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid keyed by ``(floor(lat / cell), floor(lon / cell))``.

    ``build`` also keeps, per cell, each stop's coordinates and the trig
    terms the distance formula needs, so queries against the indexed points
    skip per-candidate lookups.
    """

    cell_size_deg: float
    cells: Mapping[Tuple[int, int], Tuple[str, ...]] = field(repr=False)
    source: Optional[Mapping[str, GeoPoint]] = field(default=None, repr=False, compare=False)
    records: Mapping[Tuple[int, int], Tuple[tuple, ...]] = field(default_factory=dict, repr=False,
                                                                 compare=False)
    # Record lists by cell range. Concurrent fills store equal values.
    _ranges: Dict[Tuple[int, int, int, int], list] = field(default_factory=dict, init=False, repr=False,
                                                           compare=False)

    def cell_of(self, p: GeoPoint) -> Tuple[int, int]:
        return (math.floor(p.lat / self.cell_size_deg), math.floor(p.lon / self.cell_size_deg))

    @classmethod
    def build(cls, stops: Mapping[str, GeoPoint], cell_size_deg: Optional[float] = None,
              model: EarthModel = WGS84) -> "SpatialGrid":
        if cell_size_deg is None:
            cell_size_deg = default_cell_size(stops.values(), model)
        if not cell_size_deg > 0:
            raise InvalidArgumentError("cell size must be positive")
        buckets: Dict[Tuple[int, int], List[str]] = {}
        for sid in sorted(stops):
            p = stops[sid]
            key = (math.floor(p.lat / cell_size_deg), math.floor(p.lon / cell_size_deg))
            buckets.setdefault(key, []).append(sid)
        records = {}
        for key, ids in buckets.items():
            recs = []
            for sid in ids:
                p = stops[sid]
                phi = math.radians(p.lat)
                recs.append((sid, p.lat, p.lon, phi, math.cos(phi)))
            records[key] = tuple(recs)
        return cls(cell_size_deg, {k: tuple(v) for k, v in buckets.items()}, stops, records)

    def _cell_range(self, bounds) -> Tuple[int, int, int, int]:
        if isinstance(bounds, GeoBounds):
            bounds = (bounds.min_lat, bounds.max_lat, bounds.min_lon, bounds.max_lon)
        lo_lat, hi_lat, lo_lon, hi_lon = bounds
        size = self.cell_size_deg
        return (math.floor(lo_lat / size), math.floor(hi_lat / size),
                math.floor(lo_lon / size), math.floor(hi_lon / size))

    def _collect(self, table: Mapping, bounds) -> list:
        r0, r1, c0, c1 = self._cell_range(bounds)
        out: list = []
        if (r1 - r0 + 1) * (c1 - c0 + 1) > len(table):
            for (r, c), entries in table.items():
                if r0 <= r <= r1 and c0 <= c <= c1:
                    out.extend(entries)
            return out
        get = table.get
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                entries = get((r, c))
                if entries:
                    out.extend(entries)
        return out

    def candidates(self, bounds) -> List[str]:
        """Ids in every cell overlapping ``bounds``, a GeoBounds or a
        ``(min_lat, max_lat, min_lon, max_lon)`` tuple."""
        return self._collect(self.cells, bounds)


def default_cell_size(points: Iterable[GeoPoint], model: EarthModel = WGS84,
                      span_m: float = 800.0) -> float:
    """Degree-equivalent of ``span_m`` at the mean latitude of ``points``."""
    lats = [p.lat for p in points]
    mean_lat = sum(lats) / len(lats) if lats else 0.0
    return span_m / meters_per_degree_lat(mean_lat, model)


def _query_box(center: GeoPoint, radius_m: float, model: EarthModel) -> Tuple[float, float, float, float]:
    """Cheap box guaranteed to contain the disc of ``radius_m``: it uses the
    polar (smallest) radius and the cosine of the most poleward latitude the
    disc can reach."""
    dlat = radius_m / (model.polar_radius_m * _DEG) * (1.0 + _BOX_PAD)
    lo_lat, hi_lat = center.lat - dlat, center.lat + dlat
    if lo_lat < -90.0 or hi_lat > 90.0:
        raise UnsupportedRegionError(f"query around {center} crosses a pole")
    dlon = dlat / math.cos(math.radians(max(-lo_lat, hi_lat)))
    lo_lon, hi_lon = center.lon - dlon, center.lon + dlon
    if lo_lon < -180.0 or hi_lon > 180.0:
        raise UnsupportedRegionError(f"query around {center} crosses the antimeridian")
    return lo_lat, hi_lat, lo_lon, hi_lon


def _scan(grid: SpatialGrid, center: GeoPoint, radius_m: float, model: EarthModel, first_only: bool):
    """Distance check over the grid's own records; same arithmetic as
    haversine_distance."""
    box = _query_box(center, radius_m, model)
    lo_lat, hi_lat, lo_lon, hi_lon = box
    a, b = model.equatorial_radius_m, model.polar_radius_m
    lat0, lon0 = center.lat, center.lon
    phi0 = math.radians(lat0)
    cos0 = math.cos(phi0)
    hits = []
    key = grid._cell_range(box)
    recs = grid._ranges.get(key)
    if recs is None:
        recs = grid._collect(grid.records, box)
        if len(grid._ranges) < 100_000:
            grid._ranges[key] = recs
    for sid, lat, lon, phi, cos_phi in recs:
        if not (lo_lat <= lat <= hi_lat and lo_lon <= lon <= hi_lon):
            continue
        if lat == lat0 and lon == lon0:
            d = 0.0
        else:
            h = math.sin((phi - phi0) / 2.0) ** 2 + cos0 * cos_phi * math.sin(math.radians(lon - lon0) / 2.0) ** 2
            d = 2.0 * _radius((phi0 + phi) / 2.0, a, b) * math.asin(math.sqrt(min(1.0, h)))
        if d <= radius_m:
            if first_only:
                return True
            hits.append((d, sid))
    if first_only:
        return False
    hits.sort()
    return [(sid, d) for d, sid in hits]


def stops_within_radius(grid: SpatialGrid, stops: Mapping[str, GeoPoint], center: GeoPoint,
                        radius_m: float, model: EarthModel = WGS84) -> List[Tuple[str, float]]:
    """All ``(stop_id, distance_m)`` with distance <= ``radius_m``, nearest first.

    Candidates come from the grid cells under a square box around the
    circle; each is then checked with the exact haversine distance.
    """
    if not radius_m > 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius_m}")
    if not stops:
        return []
    if stops is grid.source:
        return _scan(grid, center, radius_m, model, False)
    box = _query_box(center, radius_m, model)
    lo_lat, hi_lat, lo_lon, hi_lon = box
    hits = []
    for sid in grid.candidates(box):
        p = stops[sid]
        if not (lo_lat <= p.lat <= hi_lat and lo_lon <= p.lon <= hi_lon):
            continue
        d = haversine_distance(center, p, model)
        if d <= radius_m:
            hits.append((d, sid))
    hits.sort()
    return [(sid, d) for d, sid in hits]


def any_within(grid: SpatialGrid, stops: Mapping[str, GeoPoint], center: GeoPoint,
               radius_m: float, model: EarthModel = WGS84) -> bool:
    """True if some stop lies within ``radius_m``; stops at the first hit."""
    if not stops:
        return False
    if stops is grid.source:
        return _scan(grid, center, radius_m, model, True)
    return bool(stops_within_radius(grid, stops, center, radius_m, model))


def nearest_stop(grid: SpatialGrid, stops: Mapping[str, GeoPoint], center: GeoPoint,
                 model: EarthModel = WGS84, start_radius_m: float = 400.0) -> Optional[Tuple[str, float]]:
    """Closest stop to ``center`` regardless of distance, or None if no stops.

    Grows the query radius geometrically; falls back to a linear scan once the
    radius becomes large enough that the box would leave the valid region.
    """
    if not stops:
        return None
    radius = start_radius_m
    while radius < 2_000_000.0:
        try:
            hits = stops_within_radius(grid, stops, center, radius, model)
        except UnsupportedRegionError:
            break
        if hits:
            return hits[0]
        radius *= 2.0
    best = min((haversine_distance(center, p, model), sid) for sid, p in stops.items())
    return best[1], best[0]
