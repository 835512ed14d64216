"""Geographic primitives: points, Web-Mercator tiles, geodesy, quadtree.

Tiles follow the slippy-map scheme: at zoom z the world is a 2^z x 2^z
grid in Web-Mercator, and the four children of a tile at z+1 cover
exactly its area, so per-tile counts aggregate 4-into-1 up the pyramid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import InvalidParameterError

EARTH_RADIUS_M = 6371008.8
MAX_MERCATOR_LAT = 85.05112878
MAX_ZOOM = 18


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidParameterError(f"coordinates must be finite, got ({self.lat}, {self.lon})")
        if not (-90.0 <= self.lat <= 90.0):
            raise InvalidParameterError(f"latitude {self.lat} outside [-90, 90]")
        # Canonical longitude in [-180, 180).
        lon = math.fmod(self.lon + 180.0, 360.0)
        if lon < 0:
            lon += 360.0
        object.__setattr__(self, "lon", lon - 180.0)
        object.__setattr__(self, "lat", float(self.lat))

    def to_dict(self) -> dict:
        return {"lat": self.lat, "lon": self.lon}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoPoint":
        return cls(float(d["lat"]), float(d["lon"]))


def mercator_unit(point: GeoPoint) -> tuple[float, float]:
    """Web-Mercator position in the unit square; latitude clamped to the
    projection's valid range so poles map to the edge rows."""
    x = (point.lon + 180.0) / 360.0
    lat = max(-MAX_MERCATOR_LAT, min(MAX_MERCATOR_LAT, point.lat))
    y = (1.0 - math.asinh(math.tan(math.radians(lat))) / math.pi) / 2.0
    return (min(max(x, 0.0), 1.0 - 1e-15), min(max(y, 0.0), 1.0 - 1e-15))


@dataclass(frozen=True)
class TileKey:
    zoom: int
    x: int
    y: int

    def __post_init__(self):
        if not (0 <= self.zoom <= MAX_ZOOM):
            raise InvalidParameterError(f"zoom {self.zoom} outside [0, {MAX_ZOOM}]")
        size = 1 << self.zoom
        if not (0 <= self.x < size and 0 <= self.y < size):
            raise InvalidParameterError(
                f"tile ({self.x}, {self.y}) outside zoom-{self.zoom} grid of {size}"
            )

    def parent(self) -> "TileKey":
        if self.zoom == 0:
            raise InvalidParameterError("zoom-0 tile has no parent")
        return TileKey(self.zoom - 1, self.x // 2, self.y // 2)

    def children(self) -> tuple["TileKey", ...]:
        if self.zoom >= MAX_ZOOM:
            raise InvalidParameterError(f"zoom {self.zoom} is the maximum")
        z, x, y = self.zoom + 1, self.x * 2, self.y * 2
        return (TileKey(z, x, y), TileKey(z, x + 1, y), TileKey(z, x, y + 1), TileKey(z, x + 1, y + 1))

    def unit_bounds(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) of this tile in the Web-Mercator unit square."""
        size = 1 << self.zoom
        return (self.x / size, self.y / size, (self.x + 1) / size, (self.y + 1) / size)


def tile_for(point: GeoPoint, zoom: int) -> TileKey:
    if not (0 <= zoom <= MAX_ZOOM):
        raise InvalidParameterError(f"zoom {zoom} outside [0, {MAX_ZOOM}]")
    x, y = mercator_unit(point)
    size = 1 << zoom
    return TileKey(zoom, min(int(x * size), size - 1), min(int(y * size), size - 1))


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def initial_bearing_deg(origin: GeoPoint, target: GeoPoint) -> float:
    """Bearing from origin to target, degrees from true north in [-180, 180)."""
    phi1, phi2 = math.radians(origin.lat), math.radians(target.lat)
    dlam = math.radians(target.lon - origin.lon)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return normalize_deg(math.degrees(math.atan2(y, x)))


def normalize_deg(angle: float) -> float:
    """Wrap an angle into [-180, 180)."""
    a = math.fmod(angle + 180.0, 360.0)
    if a < 0:
        a += 360.0
    return a - 180.0


def point_at(origin: GeoPoint, bearing_deg: float, distance_m: float) -> GeoPoint:
    """Destination point along a great circle."""
    delta = distance_m / EARTH_RADIUS_M
    theta = math.radians(bearing_deg)
    phi1 = math.radians(origin.lat)
    lam1 = math.radians(origin.lon)
    phi2 = math.asin(
        math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta)
    )
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    return GeoPoint(math.degrees(phi2), math.degrees(lam2))


def spherical_mean(points: Iterable[GeoPoint]) -> GeoPoint:
    """Centroid via 3-D unit-vector mean; correct across the antimeridian."""
    sx = sy = sz = 0.0
    n = 0
    for p in points:
        phi, lam = math.radians(p.lat), math.radians(p.lon)
        sx += math.cos(phi) * math.cos(lam)
        sy += math.cos(phi) * math.sin(lam)
        sz += math.sin(phi)
        n += 1
    if n == 0:
        raise InvalidParameterError("spherical mean of no points")
    norm = math.sqrt(sx * sx + sy * sy + sz * sz)
    if norm < 1e-12:
        # Degenerate (antipodal) constellation; fall back to the equator origin.
        return GeoPoint(0.0, 0.0)
    return GeoPoint(
        math.degrees(math.asin(max(-1.0, min(1.0, sz / norm)))),
        math.degrees(math.atan2(sy, sx)),
    )


class Quadtree:
    """Point index over the Web-Mercator unit square, keyed by TileKey.

    Leaves split into the four child tiles once they exceed capacity,
    down to the maximum tile zoom. Query returns candidate items whose
    point lies inside the given unit-square rectangle.
    """

    __slots__ = ("key", "_points", "_children", "capacity")

    def __init__(self, key: TileKey = TileKey(0, 0, 0), capacity: int = 32):
        self.key = key
        self.capacity = capacity
        self._points: list[tuple[float, float, object]] = []
        self._children: list[Quadtree] | None = None

    def insert(self, x: float, y: float, item: object) -> None:
        if self._children is not None:
            self._child_for(x, y).insert(x, y, item)
            return
        self._points.append((x, y, item))
        if len(self._points) > self.capacity and self.key.zoom < MAX_ZOOM:
            self._children = [Quadtree(k, self.capacity) for k in self.key.children()]
            points, self._points = self._points, []
            for px, py, it in points:
                self._child_for(px, py).insert(px, py, it)

    def _child_for(self, x: float, y: float) -> "Quadtree":
        x0, y0, x1, y1 = self.key.unit_bounds()
        mx, my = (x0 + x1) / 2, (y0 + y1) / 2
        idx = (1 if x >= mx else 0) + (2 if y >= my else 0)
        return self._children[idx]

    def query(self, x0: float, y0: float, x1: float, y1: float) -> Iterator[object]:
        """Candidates in the closed rectangle; callers re-filter exactly."""
        bx0, by0, bx1, by1 = self.key.unit_bounds()
        if bx1 < x0 or bx0 > x1 or by1 < y0 or by0 > y1:
            return
        if self._children is not None:
            for child in self._children:
                yield from child.query(x0, y0, x1, y1)
            return
        for px, py, item in self._points:
            if x0 <= px <= x1 and y0 <= py <= y1:
                yield item

    def __len__(self) -> int:
        if self._children is None:
            return len(self._points)
        return sum(len(c) for c in self._children)
