"""Transit network analytics: graph model, routing with transfers, Monte
Carlo coverage and cross-city reports."""

__version__ = "0.1.0"

from .coverage import (AccessResult, CoverageResult, PopulationMap, SampleConfig, TripSummary, area_coverage,
                       poi_access, population_coverage, sample_area_points, sample_population_points,
                       trip_metrics)
from .geodesy import (WGS84, EarthModel, GeoBounds, GeoPoint, SpatialGrid, bounding_square, earth_radius,
                      haversine_distance, stops_within_radius)
from .ingest import (PointOfInterest, PopulationRegion, RawFeed, derive_connections, load_pois,
                     load_population, load_snapshot, prune_isolated_stops)
from .model import Connection, RouteInfo, Stop
from .network import (StructuralMetrics, TransitNetwork, build_network, connected_components, find_bridges,
                      merge_nearby_stops, prepare_network, structural_metrics)
from .report import (CityReport, ComparisonTable, ConnectionSummary, build_city_report, compare_cities,
                     export_geojson, render_tables)
from .routing import PathQuery, PathResult, count_transfers, min_transfers_bruteforce, shortest_time_path

__all__ = [
    "__version__", "AccessResult", "CoverageResult", "PopulationMap", "SampleConfig", "TripSummary",
    "area_coverage", "poi_access", "population_coverage", "sample_area_points", "sample_population_points",
    "trip_metrics", "WGS84", "EarthModel", "GeoBounds", "GeoPoint", "SpatialGrid", "bounding_square",
    "earth_radius", "haversine_distance", "stops_within_radius", "PointOfInterest", "PopulationRegion",
    "RawFeed", "derive_connections", "load_pois", "load_population", "load_snapshot", "prune_isolated_stops",
    "StructuralMetrics", "TransitNetwork", "build_network", "connected_components", "find_bridges",
    "merge_nearby_stops", "prepare_network", "structural_metrics", "CityReport", "ComparisonTable",
    "ConnectionSummary", "build_city_report", "compare_cities", "export_geojson", "render_tables",
    "Connection", "RouteInfo", "Stop", "PathQuery", "PathResult", "count_transfers", "min_transfers_bruteforce",
    "shortest_time_path",
]
