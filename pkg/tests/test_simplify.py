import math

import numpy as np
import pytest

from triptime.errors import ValidationError
from triptime.geo import M_PER_DEG_LAT, GeoPoint
from triptime.simplify import Epsilon, polyline_deviation_m, rdp, rdp_mask


def sine_wave_path(n_points=800, length_m=2000.0, amplitude_m=300.0,
                   wavelength_m=2000.0):
    """A sine-shaped east-west track, amplitude in metres of latitude."""
    pts = []
    for i in range(n_points):
        x = length_m * i / (n_points - 1)
        y = amplitude_m * math.sin(2 * math.pi * x / wavelength_m)
        pts.append(GeoPoint(y / M_PER_DEG_LAT, x / M_PER_DEG_LAT))
    return pts


def random_path(rng, n_points=500, step_m=30.0):
    """A jittery random walk, the shape of a noisy GPS trace."""
    lat = lon = 0.0
    heading = rng.uniform(0, 2 * math.pi)
    pts = []
    for _ in range(n_points):
        pts.append(GeoPoint(lat, lon))
        heading += rng.normal(0, 0.4)
        lat += step_m * math.sin(heading) / M_PER_DEG_LAT
        lon += step_m * math.cos(heading) / M_PER_DEG_LAT
    return pts


def is_subsequence(sub, full):
    it = iter(full)
    return all(any(p == q for q in it) for p in sub)


class TestEpsilon:
    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
    def test_invalid(self, bad):
        with pytest.raises(ValidationError):
            Epsilon(bad)


class TestRdpBasics:
    def test_two_points_unchanged(self):
        pts = [GeoPoint(0, 0), GeoPoint(0, 0.01)]
        assert rdp(pts, 10.0) == pts

    def test_collinear_keeps_endpoints_only(self):
        pts = [GeoPoint(0, 0), GeoPoint(0, 0.005), GeoPoint(0, 0.01)]
        assert rdp(pts, Epsilon(10.0)) == [pts[0], pts[2]]

    def test_single_point_error(self):
        with pytest.raises(ValidationError):
            rdp([GeoPoint(0, 0)], 10.0)

    def test_spike_retained(self):
        pts = [GeoPoint(0, 0), GeoPoint(0.001, 0.005), GeoPoint(0, 0.01)]
        # the middle point deviates ~111 m from the chord
        assert rdp(pts, 10.0) == pts

    def test_closed_loop_handled(self):
        # identical endpoints: deviation falls back to point distance
        pts = [GeoPoint(0, 0), GeoPoint(0.001, 0.0005), GeoPoint(0, 0.001),
               GeoPoint(0, 0)]
        out = rdp(pts, 10.0)
        assert out[0] == out[-1] == pts[0]
        assert len(out) >= 3


class TestSineFixture:
    def test_reduction_and_deviation_bound(self):
        pts = sine_wave_path()
        eps = 10.0
        out = rdp(pts, eps)
        assert len(out) <= len(pts) * 0.10  # at least 90% reduction
        kept = set((p.lat, p.lon) for p in out)
        removed = [p for p in pts if (p.lat, p.lon) not in kept]
        worst = max(polyline_deviation_m(p, out) for p in removed)
        assert worst <= eps


class TestRdpProperties:
    def test_properties_random_trajectories(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            pts = random_path(rng, n_points=300)
            for eps in (5.0, 20.0):
                out = rdp(pts, eps)
                assert out[0] == pts[0] and out[-1] == pts[-1]
                assert is_subsequence(out, pts)
                assert rdp(out, eps) == out  # idempotence
                kept = set(id(p) for p in out)
                removed = [p for p in pts if id(p) not in kept]
                if removed:
                    assert max(polyline_deviation_m(p, out) for p in removed) <= eps

    def test_epsilon_monotonicity(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            pts = random_path(rng, n_points=300)
            sizes = [len(rdp(pts, e)) for e in (2.0, 5.0, 10.0, 25.0, 60.0)]
            assert sizes == sorted(sizes, reverse=True)

    def test_mask_matches_points(self):
        rng = np.random.default_rng(23)
        pts = random_path(rng, n_points=100)
        mask = rdp_mask(pts, 10.0)
        assert [p for p, k in zip(pts, mask) if k] == rdp(pts, 10.0)

    def test_deep_input_no_recursion_limit(self):
        # a long zigzag forces many splits; must not hit the recursion limit
        pts = []
        for i in range(5000):
            y = 0.002 if i % 2 else 0.0
            pts.append(GeoPoint(y, i * 0.0005))
        out = rdp(pts, 10.0)
        assert len(out) == 5000  # every zigzag vertex deviates ~200 m
