"""Segment per-vehicle record streams into ignition-delimited trips.

A trip spans one ignition-on .. ignition-off pair inclusive. Records
outside any pair are discarded and counted; a repeated ignition-on before
the matching off abandons the pending trip (tracker reboot heuristic).
Every input record ends up either assigned to exactly one trip or in one
of the discard buckets, so the counts always reconcile.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import time, timezone
from typing import IO, Iterable, Sequence

from . import geo
from .errors import DegenerateTripError, ValidationError
from .ingest import LOCAL_TZ, EventReason, GpsRecord


@dataclass(frozen=True)
class Trip:
    """An ordered record sequence between ignition-on and ignition-off."""

    vehicle_id: str
    points: tuple[GpsRecord, ...]
    start_ts: float
    end_ts: float
    distance_km: float
    duration_s: float
    avg_speed_kmh: float

    @property
    def trip_id(self) -> str:
        return f"{self.vehicle_id}:{int(self.start_ts)}"

    def start_local(self, tz: timezone = LOCAL_TZ):
        return self.points[0].local_datetime(tz)

    def to_dict(self) -> dict:
        return {
            "trip_id": self.trip_id,
            "vehicle_id": self.vehicle_id,
            "start_ts": self.start_ts,
            "end_ts": self.end_ts,
            "distance_km": self.distance_km,
            "duration_s": self.duration_s,
            "avg_speed_kmh": self.avg_speed_kmh,
            "points": [p.to_dict() for p in self.points],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trip":
        return cls(
            vehicle_id=str(d["vehicle_id"]),
            points=tuple(GpsRecord.from_dict(p) for p in d["points"]),
            start_ts=float(d["start_ts"]),
            end_ts=float(d["end_ts"]),
            distance_km=float(d["distance_km"]),
            duration_s=float(d["duration_s"]),
            avg_speed_kmh=float(d["avg_speed_kmh"]),
        )


@dataclass
class SegmentReport:
    """Record-level accounting for one segmentation run."""

    records_total: int = 0
    records_assigned: int = 0
    discarded_outside: int = 0      # records outside any on..off pair
    discarded_incomplete: int = 0   # records of abandoned/unterminated pending trips
    discarded_degenerate: int = 0   # records of zero-duration trips
    trips_emitted: int = 0
    trips_degenerate: int = 0

    @property
    def records_discarded(self) -> int:
        return self.discarded_outside + self.discarded_incomplete + self.discarded_degenerate

    def merge(self, other: "SegmentReport") -> None:
        self.records_total += other.records_total
        self.records_assigned += other.records_assigned
        self.discarded_outside += other.discarded_outside
        self.discarded_incomplete += other.discarded_incomplete
        self.discarded_degenerate += other.discarded_degenerate
        self.trips_emitted += other.trips_emitted
        self.trips_degenerate += other.trips_degenerate


def compute_attributes(points: Sequence[GpsRecord]) -> tuple[float, float, float]:
    """Return (distance_km, duration_s, avg_speed_kmh) for a point sequence.

    Raises DegenerateTripError when the span has zero duration.
    """
    if len(points) < 2:
        raise ValidationError("trip needs at least 2 points")
    duration = points[-1].timestamp - points[0].timestamp
    if duration < 0:
        raise ValidationError("points are not sorted by timestamp")
    if duration == 0:
        raise DegenerateTripError("zero-duration trip")
    distance = 0.0
    for prev, cur in zip(points, points[1:]):
        distance += geo.haversine_km(prev.position, cur.position)
    return distance, duration, distance / (duration / 3600.0)


def _close_trip(points: list[GpsRecord], report: SegmentReport) -> Trip | None:
    try:
        distance, duration, avg_speed = compute_attributes(points)
    except DegenerateTripError:
        report.trips_degenerate += 1
        report.discarded_degenerate += len(points)
        return None
    report.trips_emitted += 1
    report.records_assigned += len(points)
    return Trip(
        vehicle_id=points[0].vehicle_id,
        points=tuple(points),
        start_ts=points[0].timestamp,
        end_ts=points[-1].timestamp,
        distance_km=distance,
        duration_s=duration,
        avg_speed_kmh=avg_speed,
    )


def segment_trips(records: Sequence[GpsRecord]) -> tuple[list[Trip], SegmentReport]:
    """Split one vehicle's timestamp-sorted records into trips.

    A fresh ignition-on while a trip is pending abandons the pending
    records (counted as discarded-incomplete) and starts over.
    """
    report = SegmentReport(records_total=len(records))
    trips: list[Trip] = []
    pending: list[GpsRecord] | None = None
    for rec in records:
        if rec.reason is EventReason.IGNITION_ON:
            if pending is not None:
                report.discarded_incomplete += len(pending)
            pending = [rec]
        elif pending is not None:
            pending.append(rec)
            if rec.reason is EventReason.IGNITION_OFF:
                trip = _close_trip(pending, report)
                if trip is not None:
                    trips.append(trip)
                pending = None
        else:
            report.discarded_outside += 1
    if pending is not None:
        report.discarded_incomplete += len(pending)
    return trips, report


def segment_all(groups: dict[str, list[GpsRecord]]) -> tuple[list[Trip], SegmentReport]:
    """Segment every vehicle's stream; results merged in vehicle-id order."""
    all_trips: list[Trip] = []
    total = SegmentReport()
    for vehicle_id in sorted(groups):
        trips, report = segment_trips(groups[vehicle_id])
        all_trips.extend(trips)
        total.merge(report)
    return all_trips, total


@dataclass
class FilterConfig:
    """Cleaning filters applied to segmented trips."""

    window_start: time = time(6, 0)
    window_end: time = time(23, 0)   # exclusive
    max_duration_s: float = 3600.0
    min_points: int = 2
    min_distance_km: float = 0.2

    def __post_init__(self):
        if self.window_start >= self.window_end:
            raise ValidationError("window_start must precede window_end")


@dataclass
class FilterReport:
    """Why trips were dropped; keyed by the first failing predicate."""

    kept: int = 0
    dropped_window: int = 0
    dropped_duration: int = 0
    dropped_points: int = 0
    dropped_distance: int = 0

    @property
    def dropped(self) -> int:
        return (self.dropped_window + self.dropped_duration
                + self.dropped_points + self.dropped_distance)


def trip_passes_filter(trip: Trip, config: FilterConfig, tz: timezone = LOCAL_TZ) -> str | None:
    """Return None when the trip passes, else the name of the failed check."""
    start = trip.start_local(tz).time()
    if not (config.window_start <= start < config.window_end):
        return "window"
    if trip.duration_s > config.max_duration_s:
        return "duration"
    if len(trip.points) < config.min_points:
        return "points"
    if trip.distance_km < config.min_distance_km:
        return "distance"
    return None


def filter_trips(trips: Iterable[Trip], config: FilterConfig | None = None,
                 tz: timezone = LOCAL_TZ) -> tuple[list[Trip], FilterReport]:
    """Keep trips that start inside the local-time window and pass sanity checks."""
    config = config or FilterConfig()
    report = FilterReport()
    kept: list[Trip] = []
    for trip in trips:
        failed = trip_passes_filter(trip, config, tz)
        if failed is None:
            kept.append(trip)
            report.kept += 1
        else:
            setattr(report, f"dropped_{failed}", getattr(report, f"dropped_{failed}") + 1)
    return kept, report


def write_trips_jsonl(trips: Iterable[Trip], handle: IO[str]) -> int:
    n = 0
    for trip in trips:
        handle.write(json.dumps(trip.to_dict()) + "\n")
        n += 1
    return n


def read_trips_jsonl(handle: IO[str]) -> list[Trip]:
    return [Trip.from_dict(json.loads(line)) for line in handle if line.strip()]
