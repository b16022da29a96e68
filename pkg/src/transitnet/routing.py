"""Travel-time routing with a static transfer surcharge, and transfer
counting along a fixed path."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError
from .model import Connection
from .network import TransitNetwork

HALF_HEADWAY = "half-headway"
ZERO_WAIT = "zero"
WAIT_POLICIES = (HALF_HEADWAY, ZERO_WAIT)
DEFAULT_TRANSFER_PENALTY_SEC = 300.0
BRUTEFORCE_MAX_EDGES = 12


@dataclass(frozen=True)
class PathQuery:
    origin_stop: str
    destination_stop: str
    transfer_penalty_sec: float = DEFAULT_TRANSFER_PENALTY_SEC
    board_wait_policy: str = HALF_HEADWAY
    single_label: bool = False

    def __post_init__(self):
        if self.board_wait_policy not in WAIT_POLICIES:
            raise InvalidArgumentError(f"unknown wait policy {self.board_wait_policy!r}")
        if not self.transfer_penalty_sec >= 0:
            raise InvalidArgumentError("transfer penalty must be >= 0")


@dataclass(frozen=True)
class PathResult:
    """``total_time_sec`` is the routing objective: in-vehicle time plus
    boarding waits plus one transfer penalty per transfer. ``travel_time_sec``
    and ``wait_time_sec`` split out the physical components."""

    edges: Tuple[Connection, ...]
    total_time_sec: float
    total_length_m: float
    transfers: int
    chosen_routes: Tuple[str, ...]
    travel_time_sec: float = 0.0
    wait_time_sec: float = 0.0
    found: bool = True

    @classmethod
    def no_path(cls) -> "PathResult":
        return cls((), math.inf, math.inf, 0, (), math.inf, math.inf, False)

    @property
    def trip_time_sec(self) -> float:
        """Time a rider experiences: riding plus waiting, no penalty."""
        return self.travel_time_sec + self.wait_time_sec


def walk_stops(edges: Sequence[Connection], origin: Optional[str] = None) -> List[str]:
    """Stop sequence visited by ``edges``; raises if they do not form a walk."""
    if not edges:
        return [] if origin is None else [origin]
    if origin is None:
        first = edges[0]
        if len(edges) > 1 and first.a not in edges[1].key:
            origin = first.a
        elif len(edges) > 1 and first.b not in edges[1].key:
            origin = first.b
        else:
            origin = first.a
    stops = [origin]
    cur = origin
    for i, c in enumerate(edges):
        if cur not in c.key:
            raise InvalidArgumentError(f"edge {i} ({c.a}-{c.b}) does not continue from stop {cur!r}")
        cur = c.other(cur)
        stops.append(cur)
    return stops


def _segments(edges: Sequence[Connection]) -> List[FrozenSet[str]]:
    """Greedy maximal single-route segments; each entry is the set of routes
    that can serve the whole segment."""
    segs: List[FrozenSet[str]] = []
    cand: Optional[FrozenSet[str]] = None
    for c in edges:
        if cand is None:
            cand = c.routes
            continue
        inter = cand & c.routes
        if inter:
            cand = inter
        else:
            segs.append(cand)
            cand = c.routes
    if cand is not None:
        segs.append(cand)
    return segs


def count_transfers(path: Sequence[Connection], origin: Optional[str] = None) -> int:
    """Transfers needed along ``path`` by keeping the routes that serve every
    edge since the last change and switching only when none remain."""
    walk_stops(path, origin)
    return max(0, len(_segments(path)) - 1)


def min_transfers_bruteforce(path: Sequence[Connection], origin: Optional[str] = None) -> int:
    """Exact minimum route changes over every one-route-per-edge assignment.

    Exponential; refuses paths longer than BRUTEFORCE_MAX_EDGES.
    """
    if len(path) > BRUTEFORCE_MAX_EDGES:
        raise InvalidArgumentError(f"path of {len(path)} edges exceeds brute-force limit {BRUTEFORCE_MAX_EDGES}")
    walk_stops(path, origin)
    if not path:
        return 0
    colors = {r: i for i, r in enumerate(sorted(set().union(*(c.routes for c in path))))}
    # Expand all assignments edge by edge, keeping (last color, changes so far).
    last = np.array([colors[r] for r in sorted(path[0].routes)], dtype=np.int16)
    changes = np.zeros(len(last), dtype=np.int16)
    for c in path[1:]:
        opts = np.array([colors[r] for r in sorted(c.routes)], dtype=np.int16)
        new_last = np.tile(opts, len(last))
        changes = np.repeat(changes, len(opts)) + (np.repeat(last, len(opts)) != new_last)
        last = new_last
    return int(changes.min())


class _Label:
    __slots__ = ("cost", "stop", "cand", "parent", "via")

    def __init__(self, cost, stop, cand, parent, via):
        self.cost = cost
        self.stop = stop
        self.cand = cand
        self.parent = parent
        self.via = via


class SearchTree:
    """Settled labels of one search from ``origin``.

    A label is (cost, candidate route set): the candidate set holds the
    routes that serve every edge since the last transfer, and relaxing an edge
    that shares none of them costs the transfer penalty. By default a stop
    keeps one label per non-dominated candidate set, which makes the search
    exact for this cost. With ``single_label`` each stop keeps only its
    cheapest label, the classic one-label Dijkstra.
    """

    def __init__(self, network: TransitNetwork, origin: str, transfer_penalty_sec: float,
                 target: Optional[str] = None, single_label: bool = False):
        if origin not in network.stops:
            raise InvalidArgumentError(f"unknown stop {origin!r}")
        self.network = network
        self.origin = origin
        self.penalty = transfer_penalty_sec
        self.best: Dict[str, _Label] = {}
        settled: Dict[str, List[_Label]] = {}
        tentative: Dict[str, float] = {}
        counter = 0
        heap = [(0.0, origin, counter, _Label(0.0, origin, None, None, None))]
        while heap:
            cu, u, _, lab = heapq.heappop(heap)
            done = settled.get(u)
            if done is not None:
                if single_label or self._dominated(lab, done):
                    continue
                done.append(lab)
            else:
                settled[u] = [lab]
                self.best[u] = lab
            if u == target:
                break
            cset = lab.cand
            for c in network.adjacency[u]:
                v = c.other(u)
                if single_label and v in settled:
                    continue
                if cset is None:
                    nxt, extra = c.routes, 0.0
                else:
                    inter = cset & c.routes
                    nxt, extra = (inter, 0.0) if inter else (c.routes, self.penalty)
                cv = cu + c.travel_time_sec + extra
                if single_label:
                    if cv >= tentative.get(v, math.inf):
                        continue
                    tentative[v] = cv
                elif v in settled and self._dominated_by(cv, nxt, settled[v]):
                    continue
                counter += 1
                heapq.heappush(heap, (cv, v, counter, _Label(cv, v, nxt, lab, c)))

    def _dominated_by(self, cost: float, cand: FrozenSet[str], done: List[_Label]) -> bool:
        for other in done:
            if other.cand is None or other.cost + self.penalty <= cost:
                return True
            if other.cost <= cost and other.cand >= cand:
                return True
        return False

    def _dominated(self, lab: _Label, done: List[_Label]) -> bool:
        return self._dominated_by(lab.cost, lab.cand, done)

    def path_to(self, destination: str, wait_policy: str = HALF_HEADWAY) -> PathResult:
        net = self.network
        if destination not in net.stops:
            raise InvalidArgumentError(f"unknown stop {destination!r}")
        if destination == self.origin:
            return PathResult((), 0.0, 0.0, 0, ())
        lab = self.best.get(destination)
        if lab is None:
            return PathResult.no_path()
        edges: List[Connection] = []
        while lab.via is not None:
            edges.append(lab.via)
            lab = lab.parent
        edges.reverse()
        return assemble_path(net, edges, self.penalty, wait_policy)


def assemble_path(network: TransitNetwork, edges: Sequence[Connection], transfer_penalty_sec: float,
                  wait_policy: str = HALF_HEADWAY) -> PathResult:
    """Cost a fixed edge sequence: each greedy segment rides the route with
    the shortest headway among those serving the segment."""
    segs = _segments(edges)
    chosen = tuple(min(s, key=lambda r: (network.routes[r].headway_min, r)) for s in segs)
    travel = 0.0
    length = 0.0
    for c in edges:
        travel += c.travel_time_sec
        length += c.length_m
    wait = 0.0
    if wait_policy == HALF_HEADWAY:
        for r in chosen:
            wait += network.routes[r].headway_min / 2.0 * 60.0
    transfers = max(0, len(segs) - 1)
    total = travel + transfers * transfer_penalty_sec + wait
    return PathResult(tuple(edges), total, length, transfers, chosen, travel, wait)


def shortest_time_path(network: TransitNetwork, query: PathQuery) -> PathResult:
    for sid in (query.origin_stop, query.destination_stop):
        if sid not in network.stops:
            raise InvalidArgumentError(f"unknown stop {sid!r}")
    tree = SearchTree(network, query.origin_stop, query.transfer_penalty_sec,
                      target=query.destination_stop, single_label=query.single_label)
    return tree.path_to(query.destination_stop, query.board_wait_policy)
