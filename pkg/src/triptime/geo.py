"""Geodesic primitives shared by the spatial pipeline stages.

All computations assume a spherical Earth with mean radius 6371.0088 km,
which is accurate to well under a metre over city-scale distances.
Bearings are degrees clockwise from true north, normalized to [0, 360).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UndefinedBearingError, ValidationError

EARTH_RADIUS_KM = 6371.0088
EARTH_RADIUS_M = EARTH_RADIUS_KM * 1000.0

# metres spanned by one degree of latitude on the reference sphere
M_PER_DEG_LAT = EARTH_RADIUS_M * math.pi / 180.0


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """A WGS-style coordinate pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValidationError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude {self.lon} outside [-180, 180]")


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in kilometres."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def bearing_deg(a: GeoPoint, b: GeoPoint) -> float:
    """Initial great-circle bearing from a to b, degrees clockwise from north.

    Raises UndefinedBearingError when the points coincide.
    """
    if a.lat == b.lat and a.lon == b.lon:
        raise UndefinedBearingError(f"bearing undefined for coincident points {a}")
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    x = math.sin(dlam) * math.cos(phi2)
    y = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return math.degrees(math.atan2(x, y)) % 360.0


def angle_diff_deg(a: float, b: float) -> float:
    """Smallest absolute angular difference between two bearings, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def perp_deviation_m(p: GeoPoint, seg_start: GeoPoint, seg_end: GeoPoint) -> float:
    """Distance in metres from p to the segment seg_start-seg_end.

    Uses a local equirectangular projection centred on the segment midpoint,
    which is adequate for the sub-kilometre chords seen in GPS trajectories.
    Raises ValidationError for a degenerate (zero-length) segment.
    """
    if seg_start.lat == seg_end.lat and seg_start.lon == seg_end.lon:
        raise ValidationError(f"degenerate segment at {seg_start}")
    mid_lat = math.radians((seg_start.lat + seg_end.lat) / 2.0)
    m_per_deg_lon = M_PER_DEG_LAT * math.cos(mid_lat)

    ax = (seg_start.lon - p.lon) * m_per_deg_lon
    ay = (seg_start.lat - p.lat) * M_PER_DEG_LAT
    bx = (seg_end.lon - p.lon) * m_per_deg_lon
    by = (seg_end.lat - p.lat) * M_PER_DEG_LAT

    dx = bx - ax
    dy = by - ay
    seg_len_sq = dx * dx + dy * dy
    # projection parameter of p (the local origin) onto the segment
    t = -(ax * dx + ay * dy) / seg_len_sq
    t = max(0.0, min(1.0, t))
    cx = ax + t * dx
    cy = ay + t * dy
    return math.hypot(cx, cy)
