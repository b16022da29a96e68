"""Command-line entry point.

Exit status: 0 on success, 1 for data errors (missing or invalid input
files, unreachable trips), 2 for usage errors (bad flags or arguments).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import asdict
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .coverage import (AREA, POINT_SOURCES, POPULATION, PopulationMap, SampleConfig, area_coverage,
                       poi_access, population_coverage, trip_metrics)
from .errors import DataError, IncomparableReportsError, InvalidArgumentError, TransitError
from .ingest import DEFAULT_SPEED_KMH, dump_snapshot, load_pois, load_population, load_snapshot
from .network import (DEFAULT_MERGE_THRESHOLD_M, TransitNetwork, find_bridges, network_to_feed,
                      prepare_network, structural_metrics)
from .report import (CityReport, build_city_report, compare_cities, dump_geojson, export_geojson,
                     render_tables)
from .routing import HALF_HEADWAY, WAIT_POLICIES, PathQuery, shortest_time_path

log = logging.getLogger("transitnet")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser, snapshot: bool = True) -> None:
    if snapshot:
        p.add_argument("--snapshot", required=True, help="city snapshot JSON")
        p.add_argument("--merge-threshold", type=float, default=DEFAULT_MERGE_THRESHOLD_M, metavar="M")
        p.add_argument("--default-speed", type=float, default=DEFAULT_SPEED_KMH, metavar="KMH",
                       help="in-vehicle speed for legs without a travel time")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--manifest", help="manifest file (default: OUT.manifest.json, or stderr)")
    p.add_argument("--format", choices=("csv", "json"), default="json")


def _sampling(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--samples", type=int, default=10_000, metavar="N")
    p.add_argument("--walk-threshold", type=float, default=400.0, metavar="M")
    p.add_argument("--service-bound", type=float, default=800.0, metavar="M")
    p.add_argument("--walk-speed", type=float, default=80.0, metavar="M_PER_MIN")
    p.add_argument("--poi-starts", type=int, default=1_000, metavar="N")
    p.add_argument("--threads", type=int, default=None, metavar="N")
    _routing(p)


def _routing(p: argparse.ArgumentParser) -> None:
    p.add_argument("--transfer-penalty", type=float, default=300.0, metavar="SEC")
    p.add_argument("--wait", choices=WAIT_POLICIES, default=HALF_HEADWAY, help="boarding wait policy")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transitnet", description="Transit network analytics")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="normalize a snapshot (connections, pruning, stop merging)")
    _common(p)

    p = sub.add_parser("metrics", help="structural totals")
    _common(p)
    p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("coverage", help="area and/or population coverage")
    _common(p)
    _sampling(p)
    p.add_argument("--population", help="population CSV; adds population-based coverage")

    p = sub.add_parser("trips", help="door-to-door trip statistics")
    _common(p)
    _sampling(p)
    p.add_argument("--source", choices=POINT_SOURCES, default=AREA)
    p.add_argument("--population")

    p = sub.add_parser("access", help="access time to the nearest point of interest")
    _common(p)
    _sampling(p)
    p.add_argument("--pois", required=True)
    p.add_argument("--source", choices=POINT_SOURCES, default=POPULATION)
    p.add_argument("--population")

    p = sub.add_parser("path", help="route between two stops")
    _common(p)
    _routing(p)
    p.add_argument("--from", dest="origin", required=True)
    p.add_argument("--to", dest="destination", required=True)

    p = sub.add_parser("bridges", help="connections whose removal disconnects the network")
    _common(p)

    p = sub.add_parser("report", help="full city report")
    _common(p)
    _sampling(p)
    p.add_argument("--population", required=True)
    p.add_argument("--pois")

    p = sub.add_parser("compare", help="compare city reports (JSON from `report`)")
    _common(p, snapshot=False)
    p.add_argument("reports", nargs="+")

    p = sub.add_parser("export-geojson", help="stops and connections as GeoJSON")
    _common(p)
    p.add_argument("--no-bridges", action="store_true")
    return parser


# -- helpers -----------------------------------------------------------------

def _sample_config(args) -> SampleConfig:
    try:
        return SampleConfig(sample_count=args.samples, walk_threshold_m=args.walk_threshold,
                            service_bound_m=args.service_bound, poi_start_count=args.poi_starts,
                            seed=args.seed, walking_speed_m_per_min=args.walk_speed,
                            transfer_penalty_sec=args.transfer_penalty, board_wait_policy=args.wait)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from None


def _network(args) -> TransitNetwork:
    if not args.merge_threshold > 0:
        raise UsageError("--merge-threshold must be positive")
    if not args.default_speed > 0:
        raise UsageError("--default-speed must be positive")
    return prepare_network(load_snapshot(args.snapshot), args.merge_threshold, speed_kmh=args.default_speed)


def _popmap(args) -> Optional[PopulationMap]:
    if not getattr(args, "population", None):
        return None
    return PopulationMap.from_regions(load_population(args.population))


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return format(v, ".4g")
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return "" if v is None else str(v)


def _records(rows: List[Dict[str, Any]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows if len(rows) != 1 else rows[0], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    cols = list(rows[0]) if rows else []
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def _flat(prefix: str, d: Dict[str, Any]) -> Dict[str, Any]:
    return {f"{prefix}{k}": v for k, v in d.items() if k != "config_echo"}


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# -- subcommands -------------------------------------------------------------

def cmd_build(args) -> str:
    return dump_snapshot(network_to_feed(_network(args)))


def cmd_metrics(args) -> str:
    return _records([asdict(structural_metrics(_network(args), seed=args.seed))], args.format)


def cmd_coverage(args) -> str:
    net, cfg, pm = _network(args), _sample_config(args), _popmap(args)
    row = _flat("area_", asdict(area_coverage(net, cfg, threads=args.threads)))
    if pm is not None:
        row.update(_flat("population_", asdict(population_coverage(net, pm, cfg, threads=args.threads))))
    return _records([row], args.format)


def cmd_trips(args) -> str:
    net, cfg, pm = _network(args), _sample_config(args), _popmap(args)
    if args.source == POPULATION and pm is None:
        raise UsageError("--source population needs --population")
    return _records([asdict(trip_metrics(net, cfg, args.source, pm, threads=args.threads))], args.format)


def cmd_access(args) -> str:
    net, cfg, pm = _network(args), _sample_config(args), _popmap(args)
    if args.source == POPULATION and pm is None:
        raise UsageError("--source population needs --population")
    pois = load_pois(args.pois)
    return _records([asdict(poi_access(net, pois, cfg, args.source, pm, threads=args.threads))], args.format)


def cmd_path(args) -> str:
    net = _network(args)
    try:
        query = PathQuery(args.origin, args.destination, args.transfer_penalty, args.wait)
        res = shortest_time_path(net, query)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from None
    row = {
        "origin": args.origin, "destination": args.destination, "found": res.found,
        "total_time_sec": res.total_time_sec if res.found else None,
        "travel_time_sec": res.travel_time_sec if res.found else None,
        "wait_time_sec": res.wait_time_sec if res.found else None,
        "total_length_m": res.total_length_m if res.found else None,
        "transfers": res.transfers, "chosen_routes": list(res.chosen_routes),
        "stops": _walk(res, args.origin),
    }
    return _records([row], args.format)


def _walk(res, origin: str) -> List[str]:
    from .routing import walk_stops
    return walk_stops(res.edges, origin) if res.found else []


def cmd_bridges(args) -> str:
    rows = [{"a": c.a, "b": c.b, "routes": sorted(c.routes), "straight_distance_m": c.straight_distance_m,
             "travel_time_sec": c.travel_time_sec} for c in find_bridges(_network(args))]
    if args.format == "json":
        return json.dumps(rows, indent=2) + "\n"
    return _records(rows, "csv") if rows else "a,b,routes,straight_distance_m,travel_time_sec\r\n"


def cmd_report(args) -> str:
    net, cfg, pm = _network(args), _sample_config(args), _popmap(args)
    pois = load_pois(args.pois) if args.pois else None
    extra = {"merge_threshold_m": args.merge_threshold, "default_speed_kmh": args.default_speed}
    report = build_city_report(net, pm, pois, cfg, extra, threads=args.threads)
    return render_tables(report, args.format)


def cmd_compare(args) -> str:
    reports = []
    for path in args.reports:
        try:
            with open(path, encoding="utf-8") as fh:
                reports.append(CityReport.from_dict(json.load(fh)))
        except FileNotFoundError:
            raise DataError(f"no such file: {path}") from None
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"not a city report: {exc}", path) from None
    return render_tables(compare_cities(reports), args.format)


def cmd_export_geojson(args) -> str:
    return dump_geojson(export_geojson(_network(args), include_bridges=not args.no_bridges))


COMMANDS = {
    "build": cmd_build, "metrics": cmd_metrics, "coverage": cmd_coverage, "trips": cmd_trips,
    "access": cmd_access, "path": cmd_path, "bridges": cmd_bridges, "report": cmd_report,
    "compare": cmd_compare, "export-geojson": cmd_export_geojson,
}


def _manifest(args, argv: Sequence[str], duration: float) -> Dict[str, Any]:
    inputs = {}
    for flag in ("snapshot", "population", "pois"):
        path = getattr(args, flag, None)
        if path:
            inputs[flag] = {"path": path, "sha256": _sha256(path)}
    for i, path in enumerate(getattr(args, "reports", None) or []):
        inputs[f"report_{i}"] = {"path": path, "sha256": _sha256(path)}
    config = None
    if hasattr(args, "samples"):
        config = asdict(_sample_config(args))
    return {
        "command": args.command,
        "argv": list(argv),
        "inputs": inputs,
        "sample_config": config,
        "merge_threshold_m": getattr(args, "merge_threshold", None),
        "transfer_penalty_sec": getattr(args, "transfer_penalty", None),
        "threads": getattr(args, "threads", None),
        "tool_version": __version__,
        "duration_sec": duration,
    }


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.print_usage(sys.stderr)
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        text = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, IncomparableReportsError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1
    except TransitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = json.dumps(_manifest(args, argv, time.perf_counter() - start), indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        with open(args.manifest or args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            fh.write(manifest)
    else:
        sys.stdout.write(text)
        if args.manifest:
            with open(args.manifest, "w", encoding="utf-8") as fh:
                fh.write(manifest)
        else:
            sys.stderr.write(manifest)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
