"""Frequent-route mining and the travel-time learning dataset.

A matched trip is assigned to the road carrying the plurality of its
traversed edges. The learning dataset holds twelve predictors per trip
(vehicle key, distance, average speed, endpoint coordinates, departure
minute/second, and calendar fields) plus the duration target, split into
train (April-August) and test (September-October) by start month.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, fields
from datetime import timezone
from typing import IO, Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ValidationError
from .ingest import LOCAL_TZ
from .mapmatch import MatchedTrajectory, RoadNetwork
from .trips import Trip

TRAIN_MONTHS = frozenset({4, 5, 6, 7, 8})
TEST_MONTHS = frozenset({9, 10})

#: Index reserved for vehicles unseen at training time.
UNSEEN_VEHICLE_KEY = 0


@dataclass(frozen=True)
class RouteStat:
    road_id: str
    trip_count: int


def assign_road(matched: MatchedTrajectory, net: RoadNetwork) -> str | None:
    """Road id carried by the plurality of traversed network edges.

    Consecutive node pairs that are not network edges contribute nothing;
    a trajectory with no recognized edge is unassigned (None). Ties break
    toward the lexicographically smallest road id.
    """
    if not matched.node_ids:
        raise ValidationError("empty trajectory")
    counts: Counter[str] = Counter()
    for a, b in zip(matched.node_ids, matched.node_ids[1:]):
        road = net.edge_roads.get((a, b))
        if road is not None:
            counts[road] += 1
    if not counts:
        return None
    return min(counts, key=lambda r: (-counts[r], r))


def mine_frequent(road_ids: Iterable[str], k: int) -> list[RouteStat]:
    """Top-k roads by trip count, descending; ties lexicographic."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    counts = Counter(road_ids)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [RouteStat(road, n) for road, n in ranked[:k]]


@dataclass(frozen=True)
class FeatureVector:
    """The twelve trip predictors plus the duration target."""

    vehicle_key: int
    trip_distance_km: float
    trip_avg_speed_kmh: float
    start_lat: float
    start_lon: float
    end_lat: float
    end_lon: float
    dep_minute: int
    dep_second: int
    day_of_week: int    # Monday=1 .. Sunday=7
    day_of_month: int
    month_of_year: int
    target_duration_s: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValidationError(f"non-finite feature {f.name}={v}")
        if not 0 <= self.dep_minute <= 59:
            raise ValidationError(f"dep_minute {self.dep_minute} out of range")
        if not 0 <= self.dep_second <= 59:
            raise ValidationError(f"dep_second {self.dep_second} out of range")
        if not 1 <= self.day_of_week <= 7:
            raise ValidationError(f"day_of_week {self.day_of_week} out of range")
        if not 1 <= self.day_of_month <= 31:
            raise ValidationError(f"day_of_month {self.day_of_month} out of range")
        if not 1 <= self.month_of_year <= 12:
            raise ValidationError(f"month_of_year {self.month_of_year} out of range")
        if self.target_duration_s <= 0:
            raise ValidationError("target_duration_s must be positive")

    def row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]


FEATURE_COLUMNS = [f.name for f in fields(FeatureVector)][:-1]
TARGET_COLUMN = fields(FeatureVector)[-1].name
DATASET_COLUMNS = FEATURE_COLUMNS + [TARGET_COLUMN]


def featurize(trip: Trip, vehicle_key: int, tz: timezone = LOCAL_TZ) -> FeatureVector:
    """Build the feature vector for a filtered trip."""
    start = trip.start_local(tz)
    first = trip.points[0].position
    last = trip.points[-1].position
    return FeatureVector(
        vehicle_key=vehicle_key,
        trip_distance_km=trip.distance_km,
        trip_avg_speed_kmh=trip.avg_speed_kmh,
        start_lat=first.lat,
        start_lon=first.lon,
        end_lat=last.lat,
        end_lon=last.lon,
        dep_minute=start.minute,
        dep_second=start.second,
        day_of_week=start.isoweekday(),
        day_of_month=start.day,
        month_of_year=start.month,
        target_duration_s=trip.duration_s,
    )


def split_by_month(vectors: Sequence[FeatureVector],
                   ) -> tuple[list[FeatureVector], list[FeatureVector], int]:
    """Partition vectors into (train, test, excluded_count) by month."""
    train, test, excluded = [], [], 0
    for v in vectors:
        if v.month_of_year in TRAIN_MONTHS:
            train.append(v)
        elif v.month_of_year in TEST_MONTHS:
            test.append(v)
        else:
            excluded += 1
    return train, test, excluded


class VehicleEncoder:
    """Persistent vehicle-id dictionary learned from the training split.

    Known vehicles get stable indices 1..n (sorted id order); unseen
    vehicles map to the reserved index 0.
    """

    def __init__(self, mapping: dict[str, int] | None = None):
        self.mapping = dict(mapping) if mapping else {}

    def fit(self, vehicle_ids: Iterable[str]) -> "VehicleEncoder":
        self.mapping = {vid: i for i, vid in enumerate(sorted(set(vehicle_ids)), start=1)}
        return self

    def encode(self, vehicle_id: str) -> int:
        return self.mapping.get(vehicle_id, UNSEEN_VEHICLE_KEY)

    def to_json(self) -> dict:
        return {"mapping": self.mapping}

    @classmethod
    def from_json(cls, data: dict) -> "VehicleEncoder":
        return cls({str(k): int(v) for k, v in data["mapping"].items()})


def build_datasets(trips: Sequence[Trip], tz: timezone = LOCAL_TZ,
                   ) -> tuple[list[FeatureVector], list[FeatureVector], int, VehicleEncoder]:
    """Featurize trips and split by month, encoding vehicles on train only.

    Returns (train, test, excluded_count, encoder).
    """
    train_trips, test_trips, excluded = [], [], 0
    for trip in trips:
        month = trip.start_local(tz).month
        if month in TRAIN_MONTHS:
            train_trips.append(trip)
        elif month in TEST_MONTHS:
            test_trips.append(trip)
        else:
            excluded += 1
    encoder = VehicleEncoder().fit(t.vehicle_id for t in train_trips)
    train = [featurize(t, encoder.encode(t.vehicle_id), tz) for t in train_trips]
    test = [featurize(t, encoder.encode(t.vehicle_id), tz) for t in test_trips]
    return train, test, excluded, encoder


def vectors_to_arrays(vectors: Sequence[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    """Stack vectors into (X, y) float arrays with the documented column order."""
    if not vectors:
        return np.empty((0, len(FEATURE_COLUMNS))), np.empty((0,))
    rows = np.array([v.row() for v in vectors], dtype=np.float64)
    return rows[:, :-1], rows[:, -1]


class FeatureScaler(BaseEstimator, TransformerMixin):
    """Per-column z-score scaler fit on the training split.

    Columns listed in passthrough_columns (the categorical vehicle key by
    default) and zero-variance columns pass through unchanged. Uses
    population statistics so a two-value column {0, 2} scales to {-1, +1}.
    """

    def __init__(self, passthrough_columns: tuple[int, ...] = (0,)):
        self.passthrough_columns = passthrough_columns

    def fit(self, X, y=None) -> "FeatureScaler":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValidationError("scaler needs a non-empty 2-D train matrix")
        self.n_features_in_ = X.shape[1]
        self.mean_ = X.mean(axis=0)
        self.std_ = X.std(axis=0)  # ddof=0
        self.scaled_ = np.ones(X.shape[1], dtype=bool)
        for col in self.passthrough_columns:
            self.scaled_[col] = False
        self.scaled_ &= self.std_ > 0
        self.mean_[~self.scaled_] = 0.0
        self.std_[~self.scaled_] = 1.0
        return self

    def _check_fitted(self, X) -> np.ndarray:
        if not hasattr(self, "mean_"):
            raise NotFittedError("FeatureScaler is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} columns, got {X.shape}")
        return X

    def transform(self, X) -> np.ndarray:
        X = self._check_fitted(X)
        return (X - self.mean_) / self.std_

    def inverse_transform(self, X) -> np.ndarray:
        X = self._check_fitted(X)
        return X * self.std_ + self.mean_

    def to_json(self) -> dict:
        if not hasattr(self, "mean_"):
            raise NotFittedError("FeatureScaler is not fitted")
        return {
            "passthrough_columns": list(self.passthrough_columns),
            "mean": self.mean_.tolist(),
            "std": self.std_.tolist(),
            "scaled": self.scaled_.astype(int).tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "FeatureScaler":
        scaler = cls(passthrough_columns=tuple(data["passthrough_columns"]))
        scaler.mean_ = np.asarray(data["mean"], dtype=np.float64)
        scaler.std_ = np.asarray(data["std"], dtype=np.float64)
        scaler.scaled_ = np.asarray(data["scaled"], dtype=bool)
        scaler.n_features_in_ = len(scaler.mean_)
        return scaler


def write_dataset_csv(vectors: Sequence[FeatureVector], handle: IO[str]) -> int:
    """Write the 13-column dataset (12 features + target) with a header row."""
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(DATASET_COLUMNS)
    for v in vectors:
        writer.writerow([repr(x) if isinstance(x, float) else x for x in v.row()])
    return len(vectors)


def read_dataset_csv(handle: IO[str]) -> tuple[np.ndarray, np.ndarray]:
    """Read a dataset CSV back into (X, y) arrays, validating the header."""
    reader = csv.reader(handle)
    header = next(reader, None)
    if header != DATASET_COLUMNS:
        raise ValidationError(f"unexpected dataset header: {header}")
    rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        return np.empty((0, len(FEATURE_COLUMNS))), np.empty((0,))
    data = np.asarray(rows, dtype=np.float64)
    return data[:, :-1], data[:, -1]
