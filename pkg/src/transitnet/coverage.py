"""Seeded Monte Carlo estimates of coverage, trips and access to points of
interest.

Random numbers come in fixed-size blocks, each seeded from ``(seed, stream,
block index)``. Blocks and per-sample work may run on several threads, but
results are always combined in index order, so the output does not depend on
the thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataQualityError, DegenerateGeometryError, InvalidArgumentError
from .geodesy import (WGS84, EarthModel, GeoPoint, SpatialGrid, any_within, bounding_square, earth_radius,
                      haversine_distance, nearest_stop, stops_within_radius)
from .ingest import PointOfInterest, PopulationRegion
from .network import TransitNetwork
from .routing import DEFAULT_TRANSFER_PENALTY_SEC, HALF_HEADWAY, WAIT_POLICIES, PathResult, SearchTree

AREA = "area"
POPULATION = "population"
POINT_SOURCES = (AREA, POPULATION)

BLOCK_SIZE = 4096
MIN_ACCEPTANCE_RATE = 1e-4
MAX_UNREACHABLE_FRACTION = 0.10

_STREAM_AREA = 1
_STREAM_POPULATION = 2
_STREAM_TRIP_ORIGIN = 3
_STREAM_TRIP_DEST = 4
_STREAM_POI = 5


@dataclass(frozen=True)
class SampleConfig:
    sample_count: int = 10_000
    walk_threshold_m: float = 400.0
    service_bound_m: float = 800.0
    poi_start_count: int = 1_000
    seed: int = 42
    walking_speed_m_per_min: float = 80.0
    transfer_penalty_sec: float = DEFAULT_TRANSFER_PENALTY_SEC
    board_wait_policy: str = HALF_HEADWAY

    def __post_init__(self):
        if not 0 < self.walk_threshold_m <= self.service_bound_m:
            raise InvalidArgumentError("need 0 < walk threshold <= service bound")
        if self.sample_count <= 0 or self.poi_start_count <= 0:
            raise InvalidArgumentError("sample counts must be positive")
        if not self.walking_speed_m_per_min > 0:
            raise InvalidArgumentError("walking speed must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidArgumentError("seed must be an unsigned 64-bit integer")
        if self.board_wait_policy not in WAIT_POLICIES:
            raise InvalidArgumentError(f"unknown wait policy {self.board_wait_policy!r}")


@dataclass(frozen=True)
class PopulationMap:
    regions: Tuple[PopulationRegion, ...]
    total_population: float

    @classmethod
    def from_regions(cls, regions: Sequence[PopulationRegion]) -> "PopulationMap":
        total = float(sum(r.population for r in regions))
        if not total > 0:
            raise InvalidArgumentError("total population must be positive")
        return cls(tuple(regions), total)


@dataclass(frozen=True)
class CoverageResult:
    mean_stops_within_threshold: float
    mean_distance_to_closest_stop_m: float
    samples_used: int
    config_echo: SampleConfig
    stops_stddev: float = 0.0
    distance_stddev_m: float = 0.0


@dataclass(frozen=True)
class TripSummary:
    mean_trip_time_min: float
    mean_trip_length_km: float
    mean_transfers: float
    mean_straight_distance_km: float
    trip_time_per_straight_km_min: float
    transfers_per_straight_km: float
    trip_length_ratio: float
    pairs_used: int = 0
    unreachable_pairs: int = 0
    trip_time_stddev_min: float = 0.0
    trip_length_stddev_km: float = 0.0
    transfers_stddev: float = 0.0
    straight_distance_stddev_km: float = 0.0

    @classmethod
    def from_means(cls, trip_time_min: float, trip_length_km: float, transfers: float,
                   straight_km: float, **extra) -> "TripSummary":
        """Fill in the per-straight-km fields from the four means."""
        if not straight_km > 0:
            raise InvalidArgumentError("mean straight distance must be positive")
        return cls(trip_time_min, trip_length_km, transfers, straight_km,
                   trip_time_min / straight_km, transfers / straight_km,
                   trip_length_km / straight_km, **extra)


@dataclass(frozen=True)
class AccessResult:
    mean_access_time_min: float
    mean_access_distance_km: float
    samples_used: int
    access_time_stddev_min: float = 0.0
    unreachable_samples: int = 0


# -- plumbing ----------------------------------------------------------------

def _threads(threads: Optional[int]) -> int:
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise InvalidArgumentError("threads must be >= 1")
    return threads


def _ordered_map(fn: Callable, items: Sequence, threads: Optional[int]) -> List:
    """``[fn(x) for x in items]``, split into one contiguous chunk per
    worker. Output order never depends on the thread count."""
    n = min(_threads(threads), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    size = -(-len(items) // n)
    chunks = [items[i:i + size] for i in range(0, len(items), size)]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda chunk: [fn(x) for x in chunk], chunks))
    return [r for part in parts for r in part]


def _block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, block)))


def _stddev(values: Sequence[float]) -> float:
    """Sample standard deviation."""
    n = len(values)
    if n < 2:
        return 0.0
    m = math.fsum(values) / n
    return math.sqrt(math.fsum((x - m) ** 2 for x in values) / (n - 1))


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


class _StopIndex:
    def __init__(self, network: TransitNetwork, model: EarthModel, first_radius_m: float = 800.0):
        self.points = network.locations()
        self.grid = SpatialGrid.build(self.points, model=model)
        self.model = model
        # Most queried points lie in the service area, so one query at the
        # service bound usually finds the nearest stop.
        self.first_radius_m = first_radius_m

    def within(self, p: GeoPoint, radius_m: float) -> List[Tuple[str, float]]:
        return stops_within_radius(self.grid, self.points, p, radius_m, self.model)

    def any_within(self, p: GeoPoint, radius_m: float) -> bool:
        return any_within(self.grid, self.points, p, radius_m, self.model)

    def nearest(self, p: GeoPoint) -> Tuple[str, float]:
        return nearest_stop(self.grid, self.points, p, self.model, self.first_radius_m)


# -- sampling ----------------------------------------------------------------

def _service_box(points: Sequence[GeoPoint], bound_m: float, model: EarthModel):
    lats = [p.lat for p in points]
    lons = [p.lon for p in points]
    # Radius shrinks poleward; the most poleward stop gives the widest box.
    r_min = earth_radius(max(abs(min(lats)), abs(max(lats))), model)
    dlat = bound_m / (r_min * math.pi / 180.0) * (1 + 1e-5)
    lo_lat, hi_lat = min(lats) - dlat, max(lats) + dlat
    worst = max(abs(lo_lat), abs(hi_lat))
    if worst >= 90:
        raise DegenerateGeometryError("service area reaches a pole")
    dlon = dlat / math.cos(math.radians(worst))
    lo_lon, hi_lon = min(lons) - dlon, max(lons) + dlon
    if lo_lon < -180 or hi_lon > 180:
        raise DegenerateGeometryError("service area crosses the antimeridian")
    return lo_lat, hi_lat, lo_lon, hi_lon


def _area_points(index: _StopIndex, count: int, config: SampleConfig, stream: int,
                 threads: Optional[int]) -> List[GeoPoint]:
    if not index.points:
        raise InvalidArgumentError("network has no stops")
    lo_lat, hi_lat, lo_lon, hi_lon = _service_box(list(index.points.values()), config.service_bound_m,
                                                  index.model)
    bound = config.service_bound_m

    def block(i: int) -> List[GeoPoint]:
        rng = _block_rng(config.seed, stream, i)
        lats = rng.uniform(lo_lat, hi_lat, BLOCK_SIZE)
        lons = rng.uniform(lo_lon, hi_lon, BLOCK_SIZE)
        out = []
        for lat, lon in zip(lats.tolist(), lons.tolist()):
            p = GeoPoint(lat, lon)
            if index.any_within(p, bound):
                out.append(p)
        return out

    accepted = block(0)
    probe = len(accepted)
    if probe == 0 or probe < MIN_ACCEPTANCE_RATE * BLOCK_SIZE:
        raise DegenerateGeometryError(f"rejection sampling accepted {probe} of {BLOCK_SIZE} probe points")
    next_block = 1
    while len(accepted) < count:
        # Blocks are seeded by index, so how many run per round only affects speed.
        wanted = math.ceil((count - len(accepted)) / probe)
        batch = list(range(next_block, next_block + wanted))
        for pts in _ordered_map(block, batch, threads):
            accepted.extend(pts)
        next_block += wanted
    return accepted[:count]


def sample_area_points(network: TransitNetwork, config: SampleConfig, model: EarthModel = WGS84,
                       threads: Optional[int] = None, count: Optional[int] = None,
                       stream: int = _STREAM_AREA) -> List[GeoPoint]:
    """Points uniform in latitude/longitude over the service area, the region
    within ``service_bound_m`` of some stop. Draws from the stops' bounding box
    grown by the bound and rejects points outside the service area."""
    return _area_points(_StopIndex(network, model, config.service_bound_m), count or config.sample_count, config, stream, threads)


def sample_population_points(popmap: PopulationMap, config: SampleConfig, model: EarthModel = WGS84,
                             threads: Optional[int] = None, count: Optional[int] = None,
                             stream: int = _STREAM_POPULATION) -> List[GeoPoint]:
    """Pick a region with probability proportional to its population, then a
    point uniformly inside its square."""
    if not popmap.total_population > 0:
        raise InvalidArgumentError("total population must be positive")
    count = count or config.sample_count
    boxes = [bounding_square(r.centroid, r.side_m / 2.0, model) for r in popmap.regions]
    lo_lat = np.array([b.min_lat for b in boxes])
    hi_lat = np.array([b.max_lat for b in boxes])
    lo_lon = np.array([b.min_lon for b in boxes])
    hi_lon = np.array([b.max_lon for b in boxes])
    weights = np.array([r.population for r in popmap.regions], dtype=float)
    cdf = np.cumsum(weights / weights.sum())
    cdf[-1] = 1.0

    def block(i: int) -> List[GeoPoint]:
        size = min(BLOCK_SIZE, count - i * BLOCK_SIZE)
        rng = _block_rng(config.seed, stream, i)
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        idx = np.minimum(idx, len(cdf) - 1)
        u, v = rng.random(size), rng.random(size)
        lats = lo_lat[idx] + u * (hi_lat[idx] - lo_lat[idx])
        lons = lo_lon[idx] + v * (hi_lon[idx] - lo_lon[idx])
        return [GeoPoint(a, b) for a, b in zip(lats.tolist(), lons.tolist())]

    blocks = _ordered_map(block, list(range(math.ceil(count / BLOCK_SIZE))), threads)
    return [p for pts in blocks for p in pts]


def _points(network: TransitNetwork, index: _StopIndex, config: SampleConfig, source: str,
            popmap: Optional[PopulationMap], count: int, stream: int, model: EarthModel,
            threads: Optional[int]) -> List[GeoPoint]:
    if source == AREA:
        return _area_points(index, count, config, stream, threads)
    if source == POPULATION:
        if popmap is None:
            raise InvalidArgumentError("population source needs a population map")
        return sample_population_points(popmap, config, model, threads, count, stream)
    raise InvalidArgumentError(f"unknown point source {source!r}")


# -- coverage ----------------------------------------------------------------

def coverage_of_points(network: TransitNetwork, points: Sequence[GeoPoint], config: SampleConfig,
                       model: EarthModel = WGS84, threads: Optional[int] = None,
                       index: Optional[_StopIndex] = None) -> CoverageResult:
    """Stops within the walk threshold and distance to the closest stop,
    averaged over ``points``. A point with no stop inside the threshold counts
    zero stops and contributes its true nearest distance, capped at the
    service bound."""
    index = index or _StopIndex(network, model, config.service_bound_m)
    walk, bound = config.walk_threshold_m, config.service_bound_m

    def one(p: GeoPoint) -> Tuple[int, float]:
        hits = index.within(p, bound)
        if not hits:
            return 0, bound
        return sum(1 for _, d in hits if d <= walk), hits[0][1]

    stats = _ordered_map(one, list(points), threads)
    if not stats:
        raise InvalidArgumentError("no sample points")
    counts = [float(c) for c, _ in stats]
    dists = [d for _, d in stats]
    return CoverageResult(_mean(counts), _mean(dists), len(stats), config, _stddev(counts), _stddev(dists))


def area_coverage(network: TransitNetwork, config: SampleConfig, model: EarthModel = WGS84,
                  threads: Optional[int] = None) -> CoverageResult:
    index = _StopIndex(network, model, config.service_bound_m)
    pts = _area_points(index, config.sample_count, config, _STREAM_AREA, threads)
    return coverage_of_points(network, pts, config, model, threads, index)


def population_coverage(network: TransitNetwork, popmap: PopulationMap, config: SampleConfig,
                        model: EarthModel = WGS84, threads: Optional[int] = None) -> CoverageResult:
    pts = sample_population_points(popmap, config, model, threads)
    return coverage_of_points(network, pts, config, model, threads)


# -- trips and access --------------------------------------------------------

class _TreeCache:
    """Search trees keyed by origin stop. Concurrent misses may build the
    same tree twice, which is harmless because trees are deterministic."""

    def __init__(self, network: TransitNetwork, penalty: float):
        self.network = network
        self.penalty = penalty
        self.trees: Dict[str, SearchTree] = {}

    def path(self, origin: str, dest: str, wait_policy: str) -> PathResult:
        tree = self.trees.get(origin)
        if tree is None:
            tree = SearchTree(self.network, origin, self.penalty)
            self.trees[origin] = tree
        return tree.path_to(dest, wait_policy)


@dataclass(frozen=True)
class Leg:
    """One door-to-door journey: walk, ride, walk."""

    time_min: float
    length_km: float
    transfers: int


def door_to_door(cache: _TreeCache, config: SampleConfig, origin: GeoPoint, o_stop: Tuple[str, float],
                 dest: GeoPoint, d_stop: Tuple[str, float]) -> Optional[Leg]:
    path = cache.path(o_stop[0], d_stop[0], config.board_wait_policy)
    if not path.found:
        return None
    walk_m = o_stop[1] + d_stop[1]
    time_min = walk_m / config.walking_speed_m_per_min + path.trip_time_sec / 60.0
    return Leg(time_min, (walk_m + path.total_length_m) / 1000.0, path.transfers)


def trip_metrics(network: TransitNetwork, config: SampleConfig, point_source: str = AREA,
                 popmap: Optional[PopulationMap] = None, model: EarthModel = WGS84,
                 threads: Optional[int] = None) -> TripSummary:
    """Door-to-door trips between independently sampled origins and
    destinations. Each trip walks to the nearest stop, rides the routed path
    and walks from the nearest stop to the destination; trip time counts riding
    and boarding waits but not the routing transfer penalty. Unreachable pairs
    are skipped, and more than 10% of them is a data-quality error."""
    index = _StopIndex(network, model, config.service_bound_m)
    n = config.sample_count
    origins = _points(network, index, config, point_source, popmap, n, _STREAM_TRIP_ORIGIN, model, threads)
    dests = _points(network, index, config, point_source, popmap, n, _STREAM_TRIP_DEST, model, threads)
    cache = _TreeCache(network, config.transfer_penalty_sec)

    def one(i: int):
        o, d = origins[i], dests[i]
        leg = door_to_door(cache, config, o, index.nearest(o), d, index.nearest(d))
        if leg is None:
            return None
        return leg, haversine_distance(o, d, model) / 1000.0

    results = _ordered_map(one, list(range(n)), threads)
    ok = [r for r in results if r is not None]
    unreachable = n - len(ok)
    if unreachable > MAX_UNREACHABLE_FRACTION * n:
        raise DataQualityError(f"{unreachable} of {n} sampled trips have no transit path", unreachable)
    times = [leg.time_min for leg, _ in ok]
    lengths = [leg.length_km for leg, _ in ok]
    transfers = [float(leg.transfers) for leg, _ in ok]
    straight = [s for _, s in ok]
    return TripSummary.from_means(
        _mean(times), _mean(lengths), _mean(transfers), _mean(straight),
        pairs_used=len(ok), unreachable_pairs=unreachable,
        trip_time_stddev_min=_stddev(times), trip_length_stddev_km=_stddev(lengths),
        transfers_stddev=_stddev(transfers), straight_distance_stddev_km=_stddev(straight))


def poi_access(network: TransitNetwork, pois: Sequence[PointOfInterest], config: SampleConfig,
               point_source: str = POPULATION, popmap: Optional[PopulationMap] = None,
               model: EarthModel = WGS84, threads: Optional[int] = None) -> AccessResult:
    """Mean door-to-door time from sampled start points to the POI that is
    quickest to reach, using the same walk/ride/walk model as trips."""
    if not pois:
        raise InvalidArgumentError("no points of interest")
    index = _StopIndex(network, model, config.service_bound_m)
    starts = _points(network, index, config, point_source, popmap, config.poi_start_count,
                     _STREAM_POI, model, threads)
    targets = sorted(((p.poi_id, p.location, index.nearest(p.location)) for p in pois),
                     key=lambda t: t[0])
    cache = _TreeCache(network, config.transfer_penalty_sec)

    def one(p: GeoPoint) -> Optional[Leg]:
        o_stop = index.nearest(p)
        best = None
        for _, loc, d_stop in targets:
            leg = door_to_door(cache, config, p, o_stop, loc, d_stop)
            if leg is not None and (best is None or leg.time_min < best.time_min):
                best = leg
        return best

    results = _ordered_map(one, starts, threads)
    ok = [r for r in results if r is not None]
    if not ok:
        raise DataQualityError("no sampled start point reaches any point of interest", len(results))
    times = [leg.time_min for leg in ok]
    return AccessResult(_mean(times), _mean([leg.length_km for leg in ok]), len(ok),
                        _stddev(times), len(results) - len(ok))


def config_dict(config: SampleConfig) -> Dict:
    return asdict(config)
