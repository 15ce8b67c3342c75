"""Parse raw GPS tracker logs into validated record streams.

Input is delimited text with a header row; the canonical column set is
``vehicle_id,timestamp,lat,lon,speed,altitude,reason``. Timestamps are
accepted as epoch seconds or ISO-8601 and are interpreted in fixed UTC+5
local time (no DST), matching the tracker deployment zone. Malformed rows
are rejected and counted, never fatal; a missing mandatory column is.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
import re
from dataclasses import dataclass, field, fields
from datetime import datetime, timedelta, timezone
from typing import IO, Iterable

from .errors import SchemaError, ValidationError
from .geo import GeoPoint

#: Fixed tracker-local timezone (UTC+5, no DST).
LOCAL_TZ = timezone(timedelta(hours=5))


class EventReason(enum.Enum):
    """Why the tracker emitted a record."""

    IGNITION_ON = "ignition_on"
    IGNITION_OFF = "ignition_off"
    TURN = "turn"
    BRAKE = "brake"
    SPEED_CHANGE = "speed_change"
    PERIODIC = "periodic"
    OTHER = "other"


#: Default raw-reason vocabulary. Keys are normalized (lowercase, single
#: spaces, alphanumeric only); unknown strings map to OTHER with the raw
#: label preserved on the record.
REASON_ALIASES: dict[str, EventReason] = {
    "ignition on": EventReason.IGNITION_ON,
    "ignitionon": EventReason.IGNITION_ON,
    "ign on": EventReason.IGNITION_ON,
    "ignition off": EventReason.IGNITION_OFF,
    "ignitionoff": EventReason.IGNITION_OFF,
    "ign off": EventReason.IGNITION_OFF,
    "turn": EventReason.TURN,
    "brake": EventReason.BRAKE,
    "brakes": EventReason.BRAKE,
    "braking": EventReason.BRAKE,
    "speed change": EventReason.SPEED_CHANGE,
    "speed increase": EventReason.SPEED_CHANGE,
    "speed decrease": EventReason.SPEED_CHANGE,
    "acceleration": EventReason.SPEED_CHANGE,
    "deceleration": EventReason.SPEED_CHANGE,
    "periodic": EventReason.PERIODIC,
    "timer": EventReason.PERIODIC,
    "interval": EventReason.PERIODIC,
    "heartbeat": EventReason.PERIODIC,
}

_NORMALIZE_RE = re.compile(r"[^a-z0-9]+")


def classify_reason(raw: str, aliases: dict[str, EventReason] | None = None) -> EventReason:
    """Map a raw reason string to its event variant (OTHER when unknown)."""
    table = REASON_ALIASES if aliases is None else aliases
    key = _NORMALIZE_RE.sub(" ", raw.strip().lower()).strip()
    return table.get(key, EventReason.OTHER)


@dataclass(frozen=True, slots=True)
class GpsRecord:
    """One tracker sample."""

    vehicle_id: str
    timestamp: float  # epoch seconds
    position: GeoPoint
    speed_kmh: float
    altitude_m: float
    reason: EventReason
    raw_reason: str

    @property
    def lat(self) -> float:
        return self.position.lat

    @property
    def lon(self) -> float:
        return self.position.lon

    def local_datetime(self, tz: timezone = LOCAL_TZ) -> datetime:
        return datetime.fromtimestamp(self.timestamp, tz)

    def to_dict(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "timestamp": _plain_number(self.timestamp),
            "lat": self.position.lat,
            "lon": self.position.lon,
            "speed": self.speed_kmh,
            "altitude": self.altitude_m,
            "reason": self.raw_reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GpsRecord":
        raw_reason = str(d["reason"])
        return cls(
            vehicle_id=str(d["vehicle_id"]),
            timestamp=float(d["timestamp"]),
            position=GeoPoint(float(d["lat"]), float(d["lon"])),
            speed_kmh=float(d["speed"]),
            altitude_m=float(d["altitude"]),
            reason=classify_reason(raw_reason),
            raw_reason=raw_reason,
        )


@dataclass(frozen=True)
class ColumnMap:
    """Maps canonical record fields to column names in the input header."""

    vehicle_id: str = "vehicle_id"
    timestamp: str = "timestamp"
    lat: str = "lat"
    lon: str = "lon"
    speed: str = "speed"
    altitude: str = "altitude"
    reason: str = "reason"

    def required_columns(self) -> list[str]:
        return [getattr(self, f.name) for f in fields(self)]


@dataclass
class RejectionReport:
    """Accounting for one parse run: every input row is accepted or rejected."""

    total_rows: int = 0
    accepted: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)

    @property
    def rejected(self) -> int:
        return len(self.rejections)


def parse_timestamp(raw: str, tz: timezone = LOCAL_TZ) -> float:
    """Parse epoch seconds or ISO-8601 into epoch seconds.

    Naive ISO timestamps are interpreted in the tracker-local zone.
    """
    text = raw.strip()
    try:
        value = float(text)
    except ValueError:
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise ValidationError(f"unparseable timestamp {raw!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=tz)
        value = dt.timestamp()
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(f"timestamp {raw!r} not a positive epoch time")
    return value


def _plain_number(x: float) -> int | float:
    return int(x) if float(x).is_integer() else float(x)


def _parse_row(row: dict[str, str], schema: ColumnMap,
               aliases: dict[str, EventReason] | None) -> GpsRecord:
    def cell(name: str) -> str:
        value = row.get(name)
        if value is None:
            raise ValidationError(f"missing value for column {name!r}")
        return value

    speed = float(cell(schema.speed))
    altitude = float(cell(schema.altitude))
    if not math.isfinite(speed) or speed < 0:
        raise ValidationError(f"speed {speed!r} must be finite and >= 0")
    if not math.isfinite(altitude):
        raise ValidationError(f"altitude {altitude!r} must be finite")
    raw_reason = cell(schema.reason).strip()
    return GpsRecord(
        vehicle_id=cell(schema.vehicle_id).strip(),
        timestamp=parse_timestamp(cell(schema.timestamp)),
        position=GeoPoint(float(cell(schema.lat)), float(cell(schema.lon))),
        speed_kmh=speed,
        altitude_m=altitude,
        reason=classify_reason(raw_reason, aliases),
        raw_reason=raw_reason,
    )


def parse_records(source: str | IO[str], schema: ColumnMap | None = None,
                  aliases: dict[str, EventReason] | None = None,
                  ) -> tuple[list[GpsRecord], RejectionReport]:
    """Parse a CSV source into records plus a rejection report.

    Records come back in file order. Rows that fail validation are counted
    with their line number; only a broken header is fatal.
    """
    schema = schema or ColumnMap()
    if isinstance(source, (str, bytes, os.PathLike)):
        handle: IO[str] = open(source, "r", encoding="utf-8", newline="")
        close = True
    else:
        handle = source
        close = False
    try:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise SchemaError("input has no header row")
        header = [h.strip() for h in reader.fieldnames]
        missing = [c for c in schema.required_columns() if c not in header]
        if missing:
            raise SchemaError(f"missing mandatory columns: {', '.join(missing)}")
        reader.fieldnames = header

        records: list[GpsRecord] = []
        report = RejectionReport()
        for row in reader:
            report.total_rows += 1
            try:
                records.append(_parse_row(row, schema, aliases))
                report.accepted += 1
            except (ValidationError, ValueError, TypeError) as exc:
                report.rejections.append((reader.line_num, str(exc)))
        return records, report
    finally:
        if close:
            handle.close()


def sort_and_group(records: Iterable[GpsRecord]) -> dict[str, list[GpsRecord]]:
    """Group records by vehicle, each list stably sorted by timestamp."""
    groups: dict[str, list[GpsRecord]] = {}
    for rec in records:
        groups.setdefault(rec.vehicle_id, []).append(rec)
    for recs in groups.values():
        recs.sort(key=lambda r: r.timestamp)  # stable: preserves input order on ties
    return dict(sorted(groups.items()))


def write_records_jsonl(records: Iterable[GpsRecord], handle: IO[str]) -> int:
    n = 0
    for rec in records:
        handle.write(json.dumps(rec.to_dict()) + "\n")
        n += 1
    return n


def read_records_jsonl(handle: IO[str]) -> list[GpsRecord]:
    return [GpsRecord.from_dict(json.loads(line)) for line in handle if line.strip()]


def records_from_csv_text(text: str, schema: ColumnMap | None = None,
                          ) -> tuple[list[GpsRecord], RejectionReport]:
    return parse_records(io.StringIO(text), schema)
