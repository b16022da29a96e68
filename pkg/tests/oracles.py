"""Independent reference implementations and random instance generators
used only by the test suite."""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from typing import Dict, List, Sequence

from transitnet.geodesy import GeoPoint
from transitnet.ingest import RawDirection, RawFeed, RawRoute, RawStop
from transitnet.model import Connection
from transitnet.network import TransitNetwork, build_network, network_from_feed

MEAN_EARTH_RADIUS_M = 6_371_008.8


def vincenty_sphere_distance(p1: GeoPoint, p2: GeoPoint, radius: float) -> float:
    """Great-circle distance via the Vincenty special case for spheres,
    evaluated with mpmath at 50 digits."""
    import mpmath

    mpmath.mp.dps = 50
    phi1, phi2 = mpmath.radians(p1.lat), mpmath.radians(p2.lat)
    dlon = mpmath.radians(mpmath.mpf(p2.lon) - mpmath.mpf(p1.lon))
    num = mpmath.sqrt((mpmath.cos(phi2) * mpmath.sin(dlon)) ** 2
                      + (mpmath.cos(phi1) * mpmath.sin(phi2)
                         - mpmath.sin(phi1) * mpmath.cos(phi2) * mpmath.cos(dlon)) ** 2)
    den = mpmath.sin(phi1) * mpmath.sin(phi2) + mpmath.cos(phi1) * mpmath.cos(phi2) * mpmath.cos(dlon)
    return float(mpmath.mpf(radius) * mpmath.atan2(num, den))


def geocentric_radius_mp(lat: float, a: float = 6378137.0, b: float = 6356752.0) -> float:
    import mpmath

    mpmath.mp.dps = 50
    phi = mpmath.radians(lat)
    c, s = mpmath.cos(phi), mpmath.sin(phi)
    return float(mpmath.sqrt(((a * a * c) ** 2 + (b * b * s) ** 2) / ((a * c) ** 2 + (b * s) ** 2)))


def destination_point(p: GeoPoint, bearing_deg: float, dist_m: float, radius: float) -> GeoPoint:
    d = dist_m / radius
    th = math.radians(bearing_deg)
    phi1, lam1 = math.radians(p.lat), math.radians(p.lon)
    phi2 = math.asin(math.sin(phi1) * math.cos(d) + math.cos(phi1) * math.sin(d) * math.cos(th))
    lam2 = lam1 + math.atan2(math.sin(th) * math.sin(d) * math.cos(phi1),
                             math.cos(d) - math.sin(phi1) * math.sin(phi2))
    return GeoPoint(math.degrees(phi2), math.degrees(lam2))


def bfs_components(nodes: Sequence[str], edges) -> List[List[str]]:
    adj: Dict[str, List[str]] = {n: [] for n in nodes}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = set()
    out = []
    for n in sorted(nodes):
        if n in seen:
            continue
        comp = []
        q = deque([n])
        seen.add(n)
        while q:
            u = q.popleft()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    q.append(v)
        out.append(sorted(comp))
    return out


def bridges_by_removal(nodes: Sequence[str], edges) -> set:
    edges = list(edges)
    base = len(bfs_components(nodes, edges))
    out = set()
    for i, e in enumerate(edges):
        rest = edges[:i] + edges[i + 1:]
        if len(bfs_components(nodes, rest)) > base:
            out.add(tuple(sorted(e)))
    return out


def bellman_ford(network: TransitNetwork, origin: str) -> Dict[str, float]:
    dist = {s: math.inf for s in network.stops}
    dist[origin] = 0.0
    for _ in range(len(network.stops)):
        changed = False
        for c in network.connections:
            for u, v in ((c.a, c.b), (c.b, c.a)):
                if dist[u] + c.travel_time_sec < dist[v]:
                    dist[v] = dist[u] + c.travel_time_sec
                    changed = True
        if not changed:
            break
    return dist


def exact_transfer_time(network: TransitNetwork, origin: str, dest: str, penalty: float) -> float:
    """Dijkstra over (stop, route) states: riding an edge on route r costs its
    travel time, switching route at a stop costs ``penalty``. Boarding the
    first route is free."""
    if origin == dest:
        return 0.0
    dist: Dict[tuple, float] = {}
    heap = []
    for c in network.adjacency[origin]:
        for r in c.routes:
            if (origin, r) not in dist:
                dist[(origin, r)] = 0.0
                heap.append((0.0, origin, r))
    heapq.heapify(heap)
    done = set()
    while heap:
        d, u, r = heapq.heappop(heap)
        if (u, r) in done:
            continue
        done.add((u, r))
        if u == dest:
            return d
        moves = []
        for c in network.adjacency[u]:
            if r in c.routes:
                moves.append(((c.other(u), r), d + c.travel_time_sec))
            for r2 in c.routes:
                if r2 != r:
                    moves.append(((u, r2), d + penalty))
        for state, nd in moves:
            if nd < dist.get(state, math.inf):
                dist[state] = nd
                heapq.heappush(heap, (nd, state[0], state[1]))
    return math.inf


def random_stops(rng: random.Random, n: int, lat0=43.65, lon0=-79.38, span_deg=0.04) -> List[RawStop]:
    return [RawStop(f"s{i:03d}", f"Stop {i}",
                    GeoPoint(lat0 + rng.uniform(0, span_deg), lon0 + rng.uniform(0, span_deg)))
            for i in range(n)]


def random_transit_feed(rng: random.Random, n_stops: int = 30, n_routes: int = 6,
                        integer_times: bool = True) -> RawFeed:
    """Routes are walks that hop to one of the few nearest unvisited stops,
    so lines look like real corridors and overlap at shared stops."""
    stops = random_stops(rng, n_stops)
    loc = {s.stop_id: s.location for s in stops}
    ids = [s.stop_id for s in stops]

    def near(sid, exclude):
        p = loc[sid]
        others = sorted((abs(loc[o].lat - p.lat) + abs(loc[o].lon - p.lon), o) for o in ids
                        if o not in exclude)
        return [o for _, o in others[:4]]

    routes = []
    for k in range(n_routes):
        seq = [rng.choice(ids)]
        for _ in range(rng.randint(3, 12)):
            opts = near(seq[-1], set(seq))
            if not opts:
                break
            seq.append(rng.choice(opts))
        times = None
        if integer_times:
            times = tuple(float(rng.randint(30, 240)) for _ in range(len(seq) - 1))
        routes.append(RawRoute(f"r{k}", f"Route {k}", float(rng.choice([5, 10, 15, 20, 30])),
                               (RawDirection(tuple(seq), times),)))
    return RawFeed("random", tuple(stops), tuple(routes))


def random_transit_network(rng: random.Random, n_stops: int = 30, n_routes: int = 6) -> TransitNetwork:
    return network_from_feed(random_transit_feed(rng, n_stops, n_routes))


def random_graph_network(rng: random.Random, n_nodes: int, n_edges: int, n_colors: int = 4) -> TransitNetwork:
    """Arbitrary simple graph with random route sets and integer times."""
    stops = random_stops(rng, n_nodes)
    ids = [s.stop_id for s in stops]
    pairs = set()
    max_edges = n_nodes * (n_nodes - 1) // 2
    while len(pairs) < min(n_edges, max_edges):
        u, v = rng.sample(ids, 2)
        pairs.add((min(u, v), max(u, v)))
    colors = [f"c{i}" for i in range(n_colors)]
    conns = [Connection(u, v, frozenset(rng.sample(colors, rng.randint(1, n_colors))),
                        100.0, float(rng.randint(10, 300))) for u, v in sorted(pairs)]
    routes = [RawRoute(c, c, 10.0, ()) for c in colors]
    return build_network(stops, conns, routes)
