"""A strict structural validator for RFC 7946 documents, used by the tests."""

import json
import math
from numbers import Real

GEOMETRY_TYPES = {"Point", "MultiPoint", "LineString", "MultiLineString", "Polygon", "MultiPolygon",
                  "GeometryCollection"}
FORBIDDEN_MEMBERS = {"crs"}


class GeoJSONError(ValueError):
    pass


def _fail(where, msg):
    raise GeoJSONError(f"{where}: {msg}")


def _position(pos, where):
    if not isinstance(pos, list) or not 2 <= len(pos) <= 3:
        _fail(where, "position must be an array of 2 or 3 numbers")
    for x in pos:
        if isinstance(x, bool) or not isinstance(x, Real) or not math.isfinite(x):
            _fail(where, f"non-numeric coordinate {x!r}")
    lon, lat = pos[0], pos[1]
    if not -180 <= lon <= 180:
        _fail(where, f"longitude {lon} out of range")
    if not -90 <= lat <= 90:
        _fail(where, f"latitude {lat} out of range")


def _positions(arr, where, minimum):
    if not isinstance(arr, list) or len(arr) < minimum:
        _fail(where, f"need at least {minimum} positions")
    for i, p in enumerate(arr):
        _position(p, f"{where}[{i}]")


def _ring(arr, where):
    _positions(arr, where, 4)
    if arr[0] != arr[-1]:
        _fail(where, "linear ring is not closed")


def geometry(g, where="geometry"):
    if not isinstance(g, dict):
        _fail(where, "geometry must be an object")
    t = g.get("type")
    if t not in GEOMETRY_TYPES:
        _fail(where, f"unknown geometry type {t!r}")
    if FORBIDDEN_MEMBERS & g.keys():
        _fail(where, "forbidden member")
    if t == "GeometryCollection":
        if "coordinates" in g or not isinstance(g.get("geometries"), list):
            _fail(where, "GeometryCollection needs geometries and no coordinates")
        for i, sub in enumerate(g["geometries"]):
            geometry(sub, f"{where}.geometries[{i}]")
        return
    if "coordinates" not in g:
        _fail(where, "missing coordinates")
    c = g["coordinates"]
    if t == "Point":
        _position(c, where)
    elif t == "MultiPoint":
        _positions(c, where, 0)
    elif t == "LineString":
        _positions(c, where, 2)
    elif t == "MultiLineString":
        for i, line in enumerate(c):
            _positions(line, f"{where}[{i}]", 2)
    elif t == "Polygon":
        for i, ring in enumerate(c):
            _ring(ring, f"{where}[{i}]")
    else:
        for i, poly in enumerate(c):
            for j, ring in enumerate(poly):
                _ring(ring, f"{where}[{i}][{j}]")


def feature(f, where="feature"):
    if not isinstance(f, dict) or f.get("type") != "Feature":
        _fail(where, "not a Feature")
    for key in ("geometry", "properties"):
        if key not in f:
            _fail(where, f"missing {key}")
    if f["geometry"] is not None:
        geometry(f["geometry"], where + ".geometry")
    if f["properties"] is not None and not isinstance(f["properties"], dict):
        _fail(where, "properties must be an object or null")
    if "id" in f and (isinstance(f["id"], bool) or not isinstance(f["id"], (str, Real))):
        _fail(where, "id must be a string or number")
    if FORBIDDEN_MEMBERS & f.keys():
        _fail(where, "forbidden member")


def validate_text(text):
    """Parse strictly (no NaN or Infinity) and validate a FeatureCollection."""
    def bad_constant(name):
        raise GeoJSONError(f"non-standard JSON constant {name}")
    doc = json.loads(text, parse_constant=bad_constant)
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        _fail("$", "not a FeatureCollection")
    if not isinstance(doc.get("features"), list):
        _fail("$", "features must be an array")
    if FORBIDDEN_MEMBERS & doc.keys():
        _fail("$", "forbidden member")
    for i, f in enumerate(doc["features"]):
        feature(f, f"features[{i}]")
    return doc
