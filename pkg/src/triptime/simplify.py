"""Ramer-Douglas-Peucker trajectory simplification.

Keeps the first and last points and recursively retains the point of
maximum perpendicular deviation whenever it exceeds the tolerance, so
every removed point lies within the tolerance of the simplified line.
Iterative with an explicit stack: trips can run to thousands of points
and must not be limited by recursion depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ValidationError
from .geo import GeoPoint, haversine_km, perp_deviation_m


@dataclass(frozen=True)
class Epsilon:
    """Simplification tolerance in metres."""

    meters: float

    def __post_init__(self):
        if not (math.isfinite(self.meters) and self.meters > 0):
            raise ValidationError(f"epsilon must be positive and finite, got {self.meters}")


def rdp_mask(points: Sequence[GeoPoint], eps: Epsilon | float) -> list[bool]:
    """Which points survive simplification (endpoints always do).

    Ties on maximum deviation keep the earliest index, making the
    recursion deterministic.
    """
    tol = eps.meters if isinstance(eps, Epsilon) else Epsilon(float(eps)).meters
    if len(points) < 2:
        raise ValidationError("rdp needs at least 2 points")

    keep = [False] * len(points)
    keep[0] = keep[-1] = True
    stack = [(0, len(points) - 1)]
    while stack:
        first, last = stack.pop()
        if last - first < 2:
            continue
        anchor_a, anchor_b = points[first], points[last]
        if anchor_a.lat == anchor_b.lat and anchor_a.lon == anchor_b.lon:
            # closed loop: measure deviation as distance to the shared endpoint
            deviations = (
                _distance_to_point_m(points[i], anchor_a) for i in range(first + 1, last)
            )
        else:
            deviations = (
                perp_deviation_m(points[i], anchor_a, anchor_b) for i in range(first + 1, last)
            )
        max_dev = -1.0
        max_idx = -1
        for offset, dev in enumerate(deviations):
            if dev > max_dev:
                max_dev = dev
                max_idx = first + 1 + offset
        if max_dev > tol:
            keep[max_idx] = True
            stack.append((max_idx, last))
            stack.append((first, max_idx))
    return keep


def rdp(points: Sequence[GeoPoint], eps: Epsilon | float) -> list[GeoPoint]:
    """Simplify a polyline to a subsequence including both endpoints."""
    return [p for p, k in zip(points, rdp_mask(points, eps)) if k]


def _distance_to_point_m(p: GeoPoint, q: GeoPoint) -> float:
    return haversine_km(p, q) * 1000.0


def polyline_deviation_m(p: GeoPoint, polyline: Sequence[GeoPoint]) -> float:
    """Minimum distance from p to any segment of the polyline, in metres.

    Brute-force scan; used as the oracle for simplification error bounds.
    """
    if len(polyline) < 2:
        raise ValidationError("polyline needs at least 2 points")
    best = math.inf
    for a, b in zip(polyline, polyline[1:]):
        if a.lat == b.lat and a.lon == b.lon:
            d = _distance_to_point_m(p, a)
        else:
            d = perp_deviation_m(p, a, b)
        if d < best:
            best = d
    return best
