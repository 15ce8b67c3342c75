"""Shared fixture builders for the test suite."""

from __future__ import annotations

import math
from datetime import datetime

from triptime.geo import GeoPoint
from triptime.ingest import LOCAL_TZ, GpsRecord, classify_reason

#: 2019-06-03 10:00:00 local (UTC+5): a Monday inside the 06:00-23:00 window.
BASE_TS = int(datetime(2019, 6, 3, 10, 0, 0, tzinfo=LOCAL_TZ).timestamp())


def local_epoch(year, month, day, hour, minute=0, second=0) -> int:
    return int(datetime(year, month, day, hour, minute, second,
                        tzinfo=LOCAL_TZ).timestamp())


def rec(vehicle="V1", ts=BASE_TS, lat=0.0, lon=0.0, speed=10.0, altitude=500.0,
        reason="Periodic") -> GpsRecord:
    return GpsRecord(
        vehicle_id=vehicle,
        timestamp=float(ts),
        position=GeoPoint(lat, lon),
        speed_kmh=speed,
        altitude_m=altitude,
        reason=classify_reason(reason),
        raw_reason=reason,
    )


def trip_records(vehicle="V1", start_ts=BASE_TS, coords=None, step_s=60):
    """Records for one complete trip: On, intermediates, Off."""
    coords = coords if coords is not None else [(0.0, 0.0), (0.0, 0.005), (0.0, 0.01)]
    out = []
    for i, (lat, lon) in enumerate(coords):
        if i == 0:
            reason = "Ignition On"
        elif i == len(coords) - 1:
            reason = "Ignition Off"
        else:
            reason = "Turn"
        out.append(rec(vehicle, start_ts + i * step_s, lat, lon, reason=reason))
    return out


def slc_distance_km(a: GeoPoint, b: GeoPoint, radius_km=6371.0088) -> float:
    """Spherical law of cosines: an independent distance oracle."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    x = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dlam)
    return radius_km * math.acos(max(-1.0, min(1.0, x)))
