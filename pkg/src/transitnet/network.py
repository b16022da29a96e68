"""The transit graph: construction, stop merging and structural analysis."""

from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import InvalidArgumentError, SelfLoopError, UndefinedSpeedError
from .geodesy import (WGS84, EarthModel, GeoPoint, SpatialGrid, default_cell_size, haversine_distance,
                      stops_within_radius)
from .ingest import (DEFAULT_SPEED_KMH, RawDirection, RawFeed, RawRoute, RawStop, derive_connections,
                     prune_isolated_stops)
from .model import Connection, RouteInfo, Stop

logger = logging.getLogger(__name__)

DEFAULT_MERGE_THRESHOLD_M = 30.0
EXACT_PATH_LENGTH_LIMIT = 3000
SAMPLED_SOURCES = 500


@dataclass(frozen=True)
class TransitNetwork:
    stops: Mapping[str, Stop]
    connections: Tuple[Connection, ...]
    routes: Mapping[str, RouteInfo]
    city: str = ""
    adjacency: Mapping[str, Tuple[Connection, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj: Dict[str, List[Connection]] = {sid: [] for sid in self.stops}
        for c in self.connections:
            adj[c.a].append(c)
            adj[c.b].append(c)
        object.__setattr__(self, "adjacency", {k: tuple(v) for k, v in adj.items()})

    def connection(self, u: str, v: str) -> Optional[Connection]:
        for c in self.adjacency.get(u, ()):
            if c.other(u) == v:
                return c
        return None

    def locations(self) -> Dict[str, GeoPoint]:
        return {sid: s.location for sid, s in self.stops.items()}


@dataclass(frozen=True)
class StructuralMetrics:
    total_length_km: float
    total_travel_time_h: float
    mean_speed_kmh: float
    stop_count: int
    route_count: int
    connected_pair_count: int
    component_count: int
    bridge_count: int
    # Computed on the largest component only.
    avg_shortest_path_hops: Optional[float] = None
    avg_clustering: Optional[float] = None
    path_length_sampled: bool = False


def _merge_parallel(conns: Iterable[Connection]) -> Dict[Tuple[str, str], Connection]:
    out: Dict[Tuple[str, str], Connection] = {}
    for c in conns:
        prev = out.get(c.key)
        if prev is None:
            out[c.key] = c
            continue
        roads = [r for r in (prev.road_distance_m, c.road_distance_m) if r is not None]
        out[c.key] = Connection(c.a, c.b, prev.routes | c.routes,
                                min(prev.straight_distance_m, c.straight_distance_m),
                                min(prev.travel_time_sec, c.travel_time_sec),
                                min(roads) if roads else None)
    return out


def build_network(stops: Iterable[Union[Stop, RawStop]], connections: Iterable[Connection],
                  routes: Iterable[Union[RouteInfo, RawRoute]], city: str = "") -> TransitNetwork:
    """Assemble a TransitNetwork, unifying duplicate pairs.

    A stop serves every route on its incident connections plus any routes a
    Stop value already carries (kept across merges that swallow an edge).
    """
    conns = list(connections)
    for c in conns:
        if c.a == c.b:
            raise SelfLoopError(c.a)
    merged = _merge_parallel(conns)

    serving: Dict[str, set] = {}
    for c in merged.values():
        serving.setdefault(c.a, set()).update(c.routes)
        serving.setdefault(c.b, set()).update(c.routes)

    stop_map: Dict[str, Stop] = {}
    for s in stops:
        if isinstance(s, RawStop):
            sid, name, loc = s.stop_id, s.name, s.location
            members = frozenset(s.merged_from or (sid,))
            served = frozenset(serving.get(sid, ()))
        else:
            sid, name, loc, members = s.id, s.name, s.location, s.merged_from
            served = s.routes | serving.get(sid, set())
        if sid in stop_map:
            raise InvalidArgumentError(f"duplicate stop id {sid!r}")
        stop_map[sid] = Stop(sid, name, loc, served, members)
    for c in merged.values():
        for end in (c.a, c.b):
            if end not in stop_map:
                raise InvalidArgumentError(f"connection {c.a}-{c.b} references unknown stop {end!r}")

    route_map: Dict[str, RouteInfo] = {}
    for r in routes:
        if isinstance(r, RawRoute):
            r = RouteInfo(r.route_id, r.name, r.headway_min, tuple(d.stops for d in r.directions))
        route_map[r.id] = r

    ordered = tuple(merged[k] for k in sorted(merged))
    return TransitNetwork(dict(sorted(stop_map.items())), ordered, dict(sorted(route_map.items())), city)


def network_from_feed(feed: RawFeed, model: EarthModel = WGS84,
                      speed_kmh: float = DEFAULT_SPEED_KMH) -> TransitNetwork:
    """derive_connections, prune_isolated_stops, build_network."""
    conns = derive_connections(feed, model, speed_kmh)
    feed, conns = prune_isolated_stops(feed, conns)
    return build_network(feed.stops, conns, feed.routes, feed.city_name)


class _UnionFind:
    def __init__(self, items: Iterable[str]):
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if ry < rx:
            rx, ry = ry, rx
        self.parent[ry] = rx
        return True


def _cluster_round(stops: Mapping[str, Stop], threshold_m: float,
                   model: EarthModel) -> Optional[Dict[str, str]]:
    """Single-linkage clusters over "closer than threshold". Returns a map
    from each stop id to its cluster representative, or None if nothing is
    that close."""
    points = {sid: s.location for sid, s in stops.items()}
    grid = SpatialGrid.build(points, default_cell_size(points.values(), model, span_m=threshold_m))
    uf = _UnionFind(points)
    merged_any = False
    for sid, p in points.items():
        for other, d in stops_within_radius(grid, points, p, threshold_m, model):
            if other != sid and d < threshold_m:
                merged_any |= uf.union(sid, other)
    if not merged_any:
        return None
    return {sid: uf.find(sid) for sid in points}


def merge_nearby_stops(network: TransitNetwork, threshold_m: float = DEFAULT_MERGE_THRESHOLD_M,
                       model: EarthModel = WGS84) -> TransitNetwork:
    """Collapse every group of stops linked by distances below ``threshold_m``.

    A merged stop takes the smallest member id, sits at the mean position of
    all original stops it absorbed and serves the union of their routes.
    Clustering repeats until no two stops are closer than the threshold, so
    the result is a fixed point of this function.
    """
    if not threshold_m > 0:
        raise InvalidArgumentError("merge threshold must be positive")
    stops = dict(network.stops)
    rename = {sid: sid for sid in stops}
    changed = False
    while len(stops) > 1:
        rep = _cluster_round(stops, threshold_m, model)
        if rep is None:
            break
        changed = True
        groups: Dict[str, List[Stop]] = {}
        for sid in sorted(stops):
            groups.setdefault(rep[sid], []).append(stops[sid])
        new_stops: Dict[str, Stop] = {}
        for root, members in groups.items():
            if len(members) == 1:
                new_stops[root] = members[0]
                continue
            weights = [len(m.merged_from) for m in members]
            total = sum(weights)
            lat = sum(w * m.location.lat for w, m in zip(weights, members)) / total
            lon = sum(w * m.location.lon for w, m in zip(weights, members)) / total
            head = members[0]
            new_stops[root] = Stop(root, head.name, GeoPoint(lat, lon),
                                   frozenset().union(*(m.routes for m in members)),
                                   frozenset().union(*(m.merged_from for m in members)))
        for orig, cur in rename.items():
            rename[orig] = rep[cur]
        stops = new_stops
    if not changed:
        return network

    moved = {orig for orig, cur in rename.items() if orig != cur} | {
        sid for sid, s in stops.items() if len(s.merged_from) > 1}
    conns = []
    for c in network.connections:
        a, b = rename[c.a], rename[c.b]
        if a == b:
            continue
        if c.a in moved or c.b in moved:
            dist = haversine_distance(stops[a].location, stops[b].location, model)
            c = Connection(a, b, c.routes, dist, c.travel_time_sec, c.road_distance_m)
        conns.append(c)

    routes = []
    for r in network.routes.values():
        seqs = []
        for seq in r.sequences:
            mapped = [rename[s] for s in seq]
            collapsed = [x for i, x in enumerate(mapped) if i == 0 or x != mapped[i - 1]]
            if len(collapsed) >= 2:
                seqs.append(tuple(collapsed))
        routes.append(RouteInfo(r.id, r.name, r.headway_min, tuple(seqs)))
    logger.info("merged %d stops into %d", len(network.stops), len(stops))
    return build_network(stops.values(), conns, routes, network.city)


def connected_components(network: TransitNetwork) -> List[List[str]]:
    """Components as sorted id lists, ordered by their smallest id."""
    seen = set()
    comps = []
    for start in network.stops:
        if start in seen:
            continue
        seen.add(start)
        comp = [start]
        stack = [start]
        while stack:
            u = stack.pop()
            for c in network.adjacency[u]:
                v = c.other(u)
                if v not in seen:
                    seen.add(v)
                    comp.append(v)
                    stack.append(v)
        comps.append(sorted(comp))
    comps.sort(key=lambda comp: comp[0])
    return comps


def find_bridges(network: TransitNetwork) -> List[Connection]:
    """Connections whose removal disconnects their endpoints (iterative
    Tarjan low-link, linear time)."""
    disc: Dict[str, int] = {}
    low: Dict[str, int] = {}
    bridges = []
    counter = 0
    for root in network.stops:
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        # frames: (vertex, edge used to reach it, iterator over incident edges)
        stack = [(root, None, iter(network.adjacency[root]))]
        while stack:
            u, via, it = stack[-1]
            advanced = False
            for c in it:
                if c is via:
                    continue
                v = c.other(u)
                if v in disc:
                    low[u] = min(low[u], disc[v])
                else:
                    disc[v] = low[v] = counter
                    counter += 1
                    stack.append((v, c, iter(network.adjacency[v])))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[u])
                if low[u] > disc[parent]:
                    bridges.append(via)
    bridges.sort(key=lambda c: c.key)
    return bridges


def _largest_component(network: TransitNetwork) -> List[str]:
    comps = connected_components(network)
    return max(comps, key=len) if comps else []


def _bfs_hops(adj: Mapping[str, Sequence[str]], source: str) -> Dict[str, int]:
    dist = {source: 0}
    q = deque([source])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def _path_and_clustering(network: TransitNetwork, seed: int) -> Tuple[Optional[float], Optional[float], bool]:
    import networkx as nx

    comp = _largest_component(network)
    if not comp:
        return None, None, False
    members = set(comp)
    g = nx.Graph()
    g.add_nodes_from(comp)
    g.add_edges_from(c.key for c in network.connections if c.a in members)
    clustering = nx.average_clustering(g)
    if len(comp) == 1:
        return 0.0, clustering, False
    if len(comp) <= EXACT_PATH_LENGTH_LIMIT:
        return nx.average_shortest_path_length(g), clustering, False
    adj = {u: sorted(g.neighbors(u)) for u in comp}
    sources = random.Random(seed).sample(comp, SAMPLED_SOURCES)
    total = 0
    for s in sources:
        total += sum(_bfs_hops(adj, s).values())
    return total / (len(sources) * (len(comp) - 1)), clustering, True


def route_legs(network: TransitNetwork) -> Iterable[Tuple[str, Connection]]:
    """Every (route id, connection) leg over all directional sequences."""
    for rid, route in network.routes.items():
        for seq in route.sequences:
            for u, v in zip(seq, seq[1:]):
                c = network.connection(u, v)
                if c is None:
                    raise InvalidArgumentError(f"route {rid} leg {u}-{v} has no connection")
                yield rid, c


def structural_metrics(network: TransitNetwork, seed: int = 42,
                       with_path_stats: bool = True) -> StructuralMetrics:
    """Network totals. Length and time add up every leg of every directional
    route sequence; road distance replaces straight distance when known."""
    length_m = 0.0
    time_s = 0.0
    for _, c in route_legs(network):
        length_m += c.length_m
        time_s += c.travel_time_sec
    if time_s == 0.0:
        if length_m > 0.0:
            raise UndefinedSpeedError("total travel time is zero but total length is not")
        speed = 0.0
    else:
        speed = (length_m / 1000.0) / (time_s / 3600.0)
    aspl = clus = None
    sampled = False
    if with_path_stats:
        aspl, clus, sampled = _path_and_clustering(network, seed)
    return StructuralMetrics(
        total_length_km=length_m / 1000.0,
        total_travel_time_h=time_s / 3600.0,
        mean_speed_kmh=speed,
        stop_count=len(network.stops),
        route_count=len(network.routes),
        connected_pair_count=len(network.connections),
        component_count=len(connected_components(network)),
        bridge_count=len(find_bridges(network)),
        avg_shortest_path_hops=aspl,
        avg_clustering=clus,
        path_length_sampled=sampled,
    )


def drop_isolated(network: TransitNetwork) -> TransitNetwork:
    if all(network.adjacency[sid] for sid in network.stops):
        return network
    keep = [s for sid, s in network.stops.items() if network.adjacency[sid]]
    return build_network(keep, network.connections, network.routes.values(), network.city)


def prepare_network(feed: RawFeed, merge_threshold_m: float = DEFAULT_MERGE_THRESHOLD_M,
                    model: EarthModel = WGS84, speed_kmh: float = DEFAULT_SPEED_KMH) -> TransitNetwork:
    """Full normalization: connections, pruning, stop merging, and a second
    pruning pass for stops whose only edges were absorbed by a merge."""
    net = network_from_feed(feed, model, speed_kmh)
    return drop_isolated(merge_nearby_stops(net, merge_threshold_m, model))


def network_to_feed(network: TransitNetwork) -> RawFeed:
    """Re-express a network in snapshot form; leg times are the connection
    times, so loading the result rebuilds the same connections."""
    stops = tuple(
        RawStop(s.id, s.name, s.location,
                tuple(sorted(s.merged_from)) if s.merged_from != frozenset([s.id]) else None)
        for s in network.stops.values())
    routes = []
    for r in network.routes.values():
        dirs = []
        for seq in r.sequences:
            legs = [network.connection(u, v) for u, v in zip(seq, seq[1:])]
            roads = [c.road_distance_m for c in legs]
            dirs.append(RawDirection(tuple(seq), tuple(c.travel_time_sec for c in legs),
                                     tuple(roads) if all(x is not None for x in roads) else None))
        if dirs:
            routes.append(RawRoute(r.id, r.name, r.headway_min, tuple(dirs)))
    return RawFeed(network.city, stops, tuple(routes))
