"""Snap GPS points to road-network nodes, bearing-constrained.

The matcher assigns each point to its nearest network node within a
search radius, restricted to nodes touching an edge whose bearing agrees
with the point's travel heading. Headings come from consecutive raw
points, not from the device. An OSRM-compatible HTTP client offers the
same per-point nearest semantics against a remote service.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
import requests
from scipy.spatial import cKDTree

from . import geo
from .errors import (RemoteRejectionError, TransportError, UnmatchableTripError,
                     ValidationError)
from .geo import GeoPoint, angle_diff_deg, bearing_deg, haversine_km
from .ingest import GpsRecord

DEFAULT_RADIUS_M = 50.0
DEFAULT_BEARING_TOL_DEG = 30.0


def _to_unit_xyz(lat_deg: np.ndarray, lon_deg: np.ndarray) -> np.ndarray:
    """Embed lat/lon on the unit sphere; chord length is monotone in arc length."""
    lat = np.radians(lat_deg)
    lon = np.radians(lon_deg)
    return np.column_stack((np.cos(lat) * np.cos(lon),
                            np.cos(lat) * np.sin(lon),
                            np.sin(lat)))


def _radius_to_chord(radius_m: float) -> float:
    """Convert a great-circle search radius to a unit-sphere chord length."""
    return 2.0 * math.sin(min(radius_m / geo.EARTH_RADIUS_M, math.pi) / 2.0)


class NodeIndex:
    """Exact nearest-node queries over the network's node positions.

    Built on a k-d tree in 3-D unit-sphere coordinates, where Euclidean
    chord ordering coincides with great-circle ordering, so results match
    a brute-force haversine scan.
    """

    def __init__(self, node_ids: Sequence[int], positions: Sequence[GeoPoint]):
        if len(node_ids) == 0:
            raise ValidationError("spatial index needs at least one node")
        if len(node_ids) != len(positions):
            raise ValidationError("node ids and positions must align")
        self.node_ids = np.asarray(node_ids, dtype=np.int64)
        self.lats = np.array([p.lat for p in positions], dtype=np.float64)
        self.lons = np.array([p.lon for p in positions], dtype=np.float64)
        self._tree = cKDTree(_to_unit_xyz(self.lats, self.lons))

    def __len__(self) -> int:
        return len(self.node_ids)

    def nearest(self, p: GeoPoint, k: int = 1) -> list[tuple[int, float]]:
        """k nearest nodes as (node_id, distance_km), closest first."""
        xyz = _to_unit_xyz(np.array([p.lat]), np.array([p.lon]))[0]
        k = min(k, len(self.node_ids))
        _, idx = self._tree.query(xyz, k=k)
        idx = np.atleast_1d(idx)
        out = [(int(self.node_ids[i]),
                haversine_km(p, GeoPoint(self.lats[i], self.lons[i]))) for i in idx]
        out.sort(key=lambda t: (t[1], t[0]))
        return out

    def within_radius(self, p: GeoPoint, radius_m: float) -> list[tuple[int, float]]:
        """Nodes within radius_m as (node_id, distance_m), sorted by (distance, id)."""
        if radius_m < 0:
            raise ValidationError("radius_m must be >= 0")
        xyz = _to_unit_xyz(np.array([p.lat]), np.array([p.lon]))[0]
        # tiny slack on the chord, then an exact haversine re-check
        chord = _radius_to_chord(radius_m) * (1.0 + 1e-12) + 1e-15
        hits = self._tree.query_ball_point(xyz, r=chord)
        out = []
        for i in hits:
            d_m = haversine_km(p, GeoPoint(self.lats[i], self.lons[i])) * 1000.0
            if d_m <= radius_m:
                out.append((int(self.node_ids[i]), d_m))
        out.sort(key=lambda t: (t[1], t[0]))
        return out


def build_index(nodes: Sequence[tuple[int, GeoPoint]]) -> NodeIndex:
    """Build the spatial index over (node_id, position) pairs."""
    return NodeIndex([n for n, _ in nodes], [p for _, p in nodes])


@dataclass(frozen=True)
class Edge:
    from_id: int
    to_id: int
    road_id: str
    bearing: float


class RoadNetwork:
    """Immutable node/edge graph with per-edge bearings and a node index."""

    def __init__(self, nodes: dict[int, GeoPoint], edges: Sequence[Edge]):
        if not nodes:
            raise ValidationError("network needs at least one node")
        self.nodes = dict(nodes)
        self.edges = list(edges)
        self.edge_roads: dict[tuple[int, int], str] = {}
        self.node_bearings: dict[int, list[float]] = {}
        for e in self.edges:
            if e.from_id not in self.nodes or e.to_id not in self.nodes:
                raise ValidationError(f"edge {e.from_id}->{e.to_id} references unknown node")
            self.edge_roads[(e.from_id, e.to_id)] = e.road_id
            self.node_bearings.setdefault(e.from_id, []).append(e.bearing)
            self.node_bearings.setdefault(e.to_id, []).append(e.bearing)
        self.index = build_index(sorted(self.nodes.items()))

    @classmethod
    def from_dict(cls, data: dict) -> "RoadNetwork":
        nodes: dict[int, GeoPoint] = {}
        for n in data["nodes"]:
            node_id = int(n["id"])
            if node_id in nodes:
                raise ValidationError(f"duplicate node id {node_id}")
            nodes[node_id] = GeoPoint(float(n["lat"]), float(n["lon"]))
        edges = []
        for e in data["edges"]:
            a, b = int(e["from"]), int(e["to"])
            if a not in nodes or b not in nodes:
                raise ValidationError(f"edge {a}->{b} references unknown node")
            edges.append(Edge(a, b, str(e["road_id"]), bearing_deg(nodes[a], nodes[b])))
        return cls(nodes, edges)

    @classmethod
    def load(cls, source: str | IO[str]) -> "RoadNetwork":
        if hasattr(source, "read"):
            return cls.from_dict(json.load(source))
        with open(source, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": i, "lat": p.lat, "lon": p.lon}
                      for i, p in sorted(self.nodes.items())],
            "edges": [{"from": e.from_id, "to": e.to_id, "road_id": e.road_id}
                      for e in self.edges],
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")


@dataclass(frozen=True)
class MatchedTrajectory:
    """A trip snapped onto network nodes, consecutive duplicates collapsed."""

    node_ids: tuple[int, ...]
    snapped_points: tuple[GeoPoint, ...]
    dropped_count: int

    def __post_init__(self):
        if len(self.node_ids) != len(self.snapped_points):
            raise ValidationError("node ids and snapped points must align")


def match_point(net: RoadNetwork, p: GeoPoint, heading: float | None = None,
                radius_m: float = DEFAULT_RADIUS_M,
                bearing_tol_deg: float = DEFAULT_BEARING_TOL_DEG) -> int | None:
    """Nearest admissible node id within radius_m, or None.

    With a heading, only nodes incident to an edge whose bearing is within
    bearing_tol_deg qualify. Ties break toward the lowest node id.
    """
    if radius_m <= 0:
        raise ValidationError("radius_m must be positive")
    if bearing_tol_deg <= 0:
        raise ValidationError("bearing_tol_deg must be positive")
    for node_id, _dist in net.index.within_radius(p, radius_m):
        if heading is None:
            return node_id
        bearings = net.node_bearings.get(node_id, ())
        if any(angle_diff_deg(b, heading) <= bearing_tol_deg for b in bearings):
            return node_id
    return None


def point_headings(points: Sequence[GpsRecord | GeoPoint]) -> list[float | None]:
    """Per-point travel heading from each point toward the next.

    The last point reuses the previous heading; coincident neighbours
    carry the last known heading forward (None until one exists).
    """
    positions = [p.position if isinstance(p, GpsRecord) else p for p in points]
    headings: list[float | None] = []
    last: float | None = None
    for i, pos in enumerate(positions):
        if i + 1 < len(positions):
            nxt = positions[i + 1]
            if pos.lat != nxt.lat or pos.lon != nxt.lon:
                last = bearing_deg(pos, nxt)
        headings.append(last)
    return headings


def match_trip(net: RoadNetwork, points: Sequence[GpsRecord | GeoPoint],
               radius_m: float = DEFAULT_RADIUS_M,
               bearing_tol_deg: float = DEFAULT_BEARING_TOL_DEG) -> MatchedTrajectory:
    """Snap a trip's points to network nodes and collapse repeats.

    Unmatched points are dropped and counted. Raises UnmatchableTripError
    when nothing matches at all.
    """
    if len(points) < 2:
        raise ValidationError("match_trip needs at least 2 points")
    headings = point_headings(points)
    positions = [p.position if isinstance(p, GpsRecord) else p for p in points]
    node_ids: list[int] = []
    snapped: list[GeoPoint] = []
    dropped = 0
    for pos, heading in zip(positions, headings):
        node_id = match_point(net, pos, heading, radius_m, bearing_tol_deg)
        if node_id is None:
            dropped += 1
            continue
        if node_ids and node_ids[-1] == node_id:
            continue
        node_ids.append(node_id)
        snapped.append(net.nodes[node_id])
    if not node_ids:
        raise UnmatchableTripError(f"no point matched within {radius_m} m")
    return MatchedTrajectory(tuple(node_ids), tuple(snapped), dropped)


class OsrmClient:
    """Per-point nearest queries against an OSRM-compatible service.

    Issues ``GET {base}/nearest/v1/{profile}/{lon},{lat}?number=1`` with a
    ``bearings={heading},{tol}`` constraint when a heading is known, and
    reads the snap from ``waypoints[0]``. Node ids come from the
    waypoint's ``nodes`` list when the service provides one; otherwise
    ids are assigned per distinct snapped location, first seen first.
    """

    def __init__(self, base_url: str, profile: str = "driving",
                 timeout_s: float = 5.0, max_retries: int = 2,
                 retry_backoff_s: float = 0.2,
                 session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.profile = profile
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.retry_backoff_s = retry_backoff_s
        self.session = session or requests.Session()

    def _get(self, url: str) -> dict:
        attempts = 0
        while True:
            attempts += 1
            try:
                resp = self.session.get(url, timeout=self.timeout_s)
            except requests.RequestException as exc:
                if attempts > self.max_retries:
                    raise TransportError(f"request failed: {exc}", attempts) from exc
                time.sleep(self.retry_backoff_s * attempts)
                continue
            if resp.status_code != 200:
                raise RemoteRejectionError(
                    f"service rejected nearest query: {resp.text[:200]}",
                    url=url, status=resp.status_code)
            try:
                return resp.json()
            except ValueError as exc:
                raise RemoteRejectionError("unparseable response body", url=url,
                                           status=resp.status_code) from exc

    def nearest(self, p: GeoPoint, heading: float | None = None,
                bearing_tol_deg: float = DEFAULT_BEARING_TOL_DEG,
                ) -> tuple[int | None, GeoPoint] | None:
        """Snap one point; returns (node_id_or_None, snapped_point) or None."""
        url = f"{self.base_url}/nearest/v1/{self.profile}/{p.lon:.6f},{p.lat:.6f}?number=1"
        if heading is not None:
            url += f"&bearings={int(round(heading)) % 360},{int(round(bearing_tol_deg))}"
        body = self._get(url)
        if body.get("code") != "Ok":
            return None
        waypoints = body.get("waypoints") or []
        if not waypoints:
            return None
        wp = waypoints[0]
        lon, lat = wp["location"]
        node_id = None
        for candidate in wp.get("nodes") or []:
            if candidate:
                node_id = int(candidate)
                break
        return node_id, GeoPoint(float(lat), float(lon))

    def match_trip(self, points: Sequence[GpsRecord | GeoPoint],
                   bearing_tol_deg: float = DEFAULT_BEARING_TOL_DEG) -> MatchedTrajectory:
        """Remote analogue of the local match_trip, same drop/collapse rules."""
        if len(points) < 2:
            raise ValidationError("match_trip needs at least 2 points")
        headings = point_headings(points)
        positions = [p.position if isinstance(p, GpsRecord) else p for p in points]
        synthetic_ids: dict[tuple[float, float], int] = {}
        node_ids: list[int] = []
        snapped: list[GeoPoint] = []
        dropped = 0
        for pos, heading in zip(positions, headings):
            result = self.nearest(pos, heading, bearing_tol_deg)
            if result is None:
                dropped += 1
                continue
            node_id, snapped_point = result
            if node_id is None:
                key = (snapped_point.lat, snapped_point.lon)
                node_id = synthetic_ids.setdefault(key, len(synthetic_ids) + 1)
            if node_ids and node_ids[-1] == node_id:
                continue
            node_ids.append(node_id)
            snapped.append(snapped_point)
        if not node_ids:
            raise UnmatchableTripError("no point matched by remote service")
        return MatchedTrajectory(tuple(node_ids), tuple(snapped), dropped)


def matched_trip_dict(trip_dict: dict, matched: MatchedTrajectory,
                      road_id: str | None) -> dict:
    """Attach a match section to a trip's JSONL object."""
    out = dict(trip_dict)
    out["match"] = {
        "node_ids": list(matched.node_ids),
        "snapped": [[p.lat, p.lon] for p in matched.snapped_points],
        "dropped_count": matched.dropped_count,
        "road_id": road_id,
    }
    return out
