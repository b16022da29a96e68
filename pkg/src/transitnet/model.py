"""Graph value types shared by ingest, network and routing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Optional, Tuple

from .geodesy import GeoPoint


@dataclass(frozen=True)
class Stop:
    id: str
    name: str
    location: GeoPoint
    routes: FrozenSet[str] = frozenset()
    merged_from: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if not self.merged_from:
            object.__setattr__(self, "merged_from", frozenset([self.id]))


@dataclass(frozen=True)
class Connection:
    """Undirected edge; endpoints are stored sorted so ``(a, b)`` is a key."""

    a: str
    b: str
    routes: FrozenSet[str]
    straight_distance_m: float
    travel_time_sec: float
    road_distance_m: Optional[float] = None

    def __post_init__(self):
        if self.b < self.a:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
        if not self.routes:
            raise ValueError(f"connection {self.a}-{self.b} has no routes")
        if self.straight_distance_m < 0 or self.travel_time_sec < 0:
            raise ValueError(f"connection {self.a}-{self.b} has negative length or time")

    @property
    def key(self) -> Tuple[str, str]:
        return (self.a, self.b)

    @property
    def length_m(self) -> float:
        """Road distance when known, else the straight-line distance."""
        return self.straight_distance_m if self.road_distance_m is None else self.road_distance_m

    def other(self, stop_id: str) -> str:
        if stop_id == self.a:
            return self.b
        if stop_id == self.b:
            return self.a
        raise ValueError(f"{stop_id!r} is not an endpoint of {self.a}-{self.b}")


@dataclass(frozen=True)
class RouteInfo:
    id: str
    name: str
    headway_min: float
    # Directional stop sequences, already expressed in the network's stop ids.
    sequences: Tuple[Tuple[str, ...], ...] = ()
