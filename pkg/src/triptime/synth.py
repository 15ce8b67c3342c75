"""Deterministic synthetic world: a grid road network plus GPS trip logs.

Every trip walks along one named road at a base speed, slowed by an
hour-of-day congestion multiplier, with Gaussian noise on the realized
duration and on each emitted GPS fix. Trip counts per road follow a
planted weight profile exactly (largest-remainder allocation), so the
frequent-route ranking the pipeline should recover is known up front.
The ground-truth table records each trip's road and its realized
duration, which equals the last-minus-first log timestamp.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import IO, Sequence

import numpy as np

from . import geo
from .errors import ValidationError
from .ingest import LOCAL_TZ
from .mapmatch import RoadNetwork

#: Hours considered rush hour by default, and their slowdown factor.
DEFAULT_CONGESTION = {8: 1.5, 9: 1.5, 17: 1.5, 18: 1.5}

#: Departure hours used by the generator (inside the 06:00-23:00 window).
DEPARTURE_HOURS = tuple(range(6, 22))


@dataclass
class SynthConfig:
    seed: int = 42
    n_vehicles: int = 50
    n_trips: int = 5000
    grid_rows: int = 10
    grid_cols: int = 10
    spacing_m: float = 200.0
    n_roads: int = 6
    start_date: date = date(2019, 4, 1)
    end_date: date = date(2019, 10, 31)
    gps_noise_m: float = 5.0
    duration_noise_s: float = 30.0
    base_speed_kmh: float = 40.0
    base_lat: float = 0.0
    base_lon: float = 0.0
    min_segments: int = 2
    max_segments: int = 8
    congestion: dict[int, float] = field(default_factory=lambda: dict(DEFAULT_CONGESTION))
    road_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if min(self.n_vehicles, self.n_trips, self.n_roads) < 1:
            raise ValidationError("counts must be >= 1")
        if self.grid_rows < 2 or self.grid_cols < 2:
            raise ValidationError("grid needs at least 2 rows and 2 columns")
        if self.spacing_m <= 0:
            raise ValidationError("spacing_m must be positive")
        if self.gps_noise_m < 0 or self.duration_noise_s < 0:
            raise ValidationError("noise levels must be >= 0")
        if self.base_speed_kmh <= 0:
            raise ValidationError("base_speed_kmh must be positive")
        if self.n_roads > self.grid_rows + self.grid_cols:
            raise ValidationError("n_roads exceeds the number of grid lines")
        if self.end_date < self.start_date:
            raise ValidationError("end_date precedes start_date")
        if not 1 <= self.min_segments <= self.max_segments:
            raise ValidationError("need 1 <= min_segments <= max_segments")
        if self.road_weights is not None:
            if len(self.road_weights) != self.n_roads:
                raise ValidationError("road_weights length must equal n_roads")
            if any(w <= 0 for w in self.road_weights):
                raise ValidationError("road_weights must be positive")

    @property
    def n_days(self) -> int:
        return (self.end_date - self.start_date).days + 1


def _grid_lines(config: SynthConfig) -> tuple[dict[int, tuple[float, float]],
                                              list[tuple[str, list[int]]]]:
    """Grid node positions plus (road_id, node sequence) per grid line."""
    dlat = config.spacing_m / geo.M_PER_DEG_LAT
    dlon = config.spacing_m / (geo.M_PER_DEG_LAT * math.cos(math.radians(config.base_lat)))
    nodes = {}
    for r in range(config.grid_rows):
        for c in range(config.grid_cols):
            nodes[r * config.grid_cols + c] = (config.base_lat + r * dlat,
                                               config.base_lon + c * dlon)
    lines: list[tuple[str, list[int]]] = []
    for r in range(config.grid_rows):
        lines.append((f"R{r % config.n_roads}",
                      [r * config.grid_cols + c for c in range(config.grid_cols)]))
    for c in range(config.grid_cols):
        lines.append((f"R{(config.grid_rows + c) % config.n_roads}",
                      [r * config.grid_cols + c for r in range(config.grid_rows)]))
    return nodes, lines


def gen_network(config: SynthConfig) -> RoadNetwork:
    """Grid network: every grid line is edged in both directions."""
    nodes, lines = _grid_lines(config)
    edges = []
    for road_id, node_seq in lines:
        for a, b in zip(node_seq, node_seq[1:]):
            edges.append({"from": a, "to": b, "road_id": road_id})
            edges.append({"from": b, "to": a, "road_id": road_id})
    return RoadNetwork.from_dict({
        "nodes": [{"id": i, "lat": lat, "lon": lon}
                  for i, (lat, lon) in sorted(nodes.items())],
        "edges": edges,
    })


def planted_counts(config: SynthConfig) -> list[tuple[str, int]]:
    """Exact trips per road, descending, via largest-remainder allocation."""
    weights = config.road_weights or tuple(
        float(config.n_roads - i) for i in range(config.n_roads))
    total_w = sum(weights)
    quotas = [config.n_trips * w / total_w for w in weights]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    short = config.n_trips - sum(counts)
    for i in sorted(range(config.n_roads), key=lambda i: (-remainders[i], i))[:short]:
        counts[i] += 1
    return [(f"R{i}", counts[i]) for i in range(config.n_roads)]


@dataclass(frozen=True)
class TripTruth:
    trip_id: str
    road_id: str
    true_duration_s: int


def gen_logs(config: SynthConfig, net: RoadNetwork | None = None,
             ) -> tuple[list[dict], list[TripTruth]]:
    """Generate raw tracker rows (timestamp-ordered) and the truth table.

    Each trip is wrapped in Ignition On/Off with Turn/Periodic fixes in
    between, scheduled into a per-vehicle (day, hour) slot so trips of
    one vehicle never overlap.
    """
    rng = np.random.default_rng(config.seed)
    nodes, lines = _grid_lines(config)
    if net is not None and len(net.nodes) != len(nodes):
        raise ValidationError("network does not match this config's grid")
    lines_by_road: dict[str, list[list[int]]] = {}
    for road_id, node_seq in lines:
        lines_by_road.setdefault(road_id, []).append(node_seq)

    roads = [road_id for road_id, count in planted_counts(config) for _ in range(count)]
    rng.shuffle(roads)

    slots = [(d, h) for d in range(config.n_days) for h in DEPARTURE_HOURS]
    per_vehicle = -(-config.n_trips // config.n_vehicles)  # ceil
    if per_vehicle > len(slots):
        raise ValidationError(
            f"{config.n_trips} trips over {config.n_vehicles} vehicles "
            f"exceed {len(slots)} departure slots per vehicle")
    vehicle_slots: dict[str, list[tuple[int, int]]] = {}
    vehicle_cursor: dict[str, int] = {}

    dlat_per_m = 1.0 / geo.M_PER_DEG_LAT
    dlon_per_m = 1.0 / (geo.M_PER_DEG_LAT * math.cos(math.radians(config.base_lat)))

    records: list[dict] = []
    truth: list[TripTruth] = []
    for j, road_id in enumerate(roads):
        vehicle = f"V{j % config.n_vehicles:04d}"
        if vehicle not in vehicle_slots:
            order = rng.permutation(len(slots))
            vehicle_slots[vehicle] = [slots[k] for k in order]
            vehicle_cursor[vehicle] = 0

        road_lines = lines_by_road[road_id]
        line = road_lines[int(rng.integers(len(road_lines)))]
        max_span = min(config.max_segments, len(line) - 1)
        min_span = min(config.min_segments, max_span)
        span = int(rng.integers(min_span, max_span + 1))
        start_idx = int(rng.integers(0, len(line) - span))
        path = line[start_idx:start_idx + span + 1]
        if rng.integers(2):
            path = path[::-1]

        day, hour = vehicle_slots[vehicle][vehicle_cursor[vehicle]]
        vehicle_cursor[vehicle] += 1
        minute = int(rng.integers(0, 50))
        second = int(rng.integers(0, 60))
        start_dt = datetime.combine(config.start_date + timedelta(days=day),
                                    time(hour, minute, second), LOCAL_TZ)
        start_ts = int(start_dt.timestamp())

        positions = [nodes[i] for i in path]
        seg_km = [geo.haversine_km(geo.GeoPoint(*a), geo.GeoPoint(*b))
                  for a, b in zip(positions, positions[1:])]
        length_km = sum(seg_km)
        multiplier = config.congestion.get(hour, 1.0)
        noise_free_s = length_km / config.base_speed_kmh * 3600.0 * multiplier
        duration_s = noise_free_s + float(rng.normal(0.0, config.duration_noise_s)) \
            if config.duration_noise_s > 0 else noise_free_s
        duration_s = max(5.0, duration_s)
        duration = int(round(duration_s))

        cum = [0.0]
        for s in seg_km:
            cum.append(cum[-1] + s)
        timestamps = [start_ts + int(round(duration * c / cum[-1])) for c in cum]

        n_points = len(path)
        jitter = rng.normal(0.0, config.gps_noise_m, size=(n_points, 2)) \
            if config.gps_noise_m > 0 else np.zeros((n_points, 2))
        altitudes = rng.normal(500.0, 5.0, size=n_points)
        for k in range(n_points):
            lat, lon = positions[k]
            if k == 0:
                reason = "Ignition On"
            elif k == n_points - 1:
                reason = "Ignition Off"
            else:
                reason = "Turn" if k % 2 else "Periodic"
            if k < n_points - 1:
                dt = timestamps[k + 1] - timestamps[k]
                speed = seg_km[k] / (dt / 3600.0) if dt > 0 else 0.0
            else:
                speed = 0.0
            records.append({
                "vehicle_id": vehicle,
                "timestamp": timestamps[k],
                "lat": float(lat + jitter[k, 0] * dlat_per_m),
                "lon": float(lon + jitter[k, 1] * dlon_per_m),
                "speed": round(float(speed), 3),
                "altitude": round(float(altitudes[k]), 1),
                "reason": reason,
            })
        truth.append(TripTruth(f"{vehicle}:{start_ts}", road_id, duration))

    records.sort(key=lambda r: (r["timestamp"], r["vehicle_id"]))
    truth.sort(key=lambda t: t.trip_id)
    return records, truth


RAW_COLUMNS = ["vehicle_id", "timestamp", "lat", "lon", "speed", "altitude", "reason"]


def write_logs_csv(records: Sequence[dict], handle: IO[str]) -> int:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(RAW_COLUMNS)
    for rec in records:
        writer.writerow([rec["vehicle_id"], rec["timestamp"],
                         repr(rec["lat"]), repr(rec["lon"]),
                         rec["speed"], rec["altitude"], rec["reason"]])
    return len(records)


def write_ground_truth_csv(truth: Sequence[TripTruth], handle: IO[str]) -> int:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["trip_id", "road_id", "true_duration_s"])
    for t in truth:
        writer.writerow([t.trip_id, t.road_id, t.true_duration_s])
    return len(truth)
