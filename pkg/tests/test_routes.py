import io
import json
import math

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from triptime.errors import ValidationError
from triptime.geo import GeoPoint
from triptime.mapmatch import MatchedTrajectory, RoadNetwork
from triptime.routes import (DATASET_COLUMNS, FEATURE_COLUMNS, FeatureScaler,
                             FeatureVector, VehicleEncoder, assign_road,
                             build_datasets, featurize, mine_frequent,
                             read_dataset_csv, split_by_month, vectors_to_arrays,
                             write_dataset_csv)
from triptime.trips import segment_trips

from helpers import local_epoch, rec, trip_records


def grid_net():
    """Four nodes in a row: edges 1-2-3 on road R1, 3-4 on road R2."""
    nodes = [{"id": i, "lat": 0.0, "lon": 0.001 * i} for i in range(1, 5)]
    edges = []
    for a, b, road in [(1, 2, "R1"), (2, 3, "R1"), (3, 4, "R2")]:
        edges.append({"from": a, "to": b, "road_id": road})
        edges.append({"from": b, "to": a, "road_id": road})
    return RoadNetwork.from_dict({"nodes": nodes, "edges": edges})


def traj(*node_ids):
    net = grid_net()
    return MatchedTrajectory(tuple(node_ids),
                             tuple(net.nodes[n] for n in node_ids), 0)


class TestAssignRoad:
    def test_single_road(self):
        assert assign_road(traj(1, 2, 3), grid_net()) == "R1"

    def test_plurality(self):
        # edges: 1-2 (R1), 2-3 (R1), 3-4 (R2) -> R1 wins 2:1
        assert assign_road(traj(1, 2, 3, 4), grid_net()) == "R1"

    def test_tie_breaks_lexicographically(self):
        # 2-3 (R1), 3-4 (R2): one edge each
        assert assign_road(traj(2, 3, 4), grid_net()) == "R1"

    def test_unassigned_when_no_edges_recognized(self):
        assert assign_road(traj(1, 3), grid_net()) is None

    def test_empty_trajectory_error(self):
        with pytest.raises(ValidationError):
            assign_road(MatchedTrajectory((), (), 0), grid_net())


class TestMineFrequent:
    def test_top_one(self):
        stats = mine_frequent(["A", "A", "A", "B"], k=1)
        assert [(s.road_id, s.trip_count) for s in stats] == [("A", 3)]

    def test_tie_lexicographic(self):
        stats = mine_frequent(["B", "A", "B", "A"], k=2)
        assert [(s.road_id, s.trip_count) for s in stats] == [("A", 2), ("B", 2)]

    def test_recovers_planted_ranking(self):
        rng = np.random.default_rng(41)
        planted = {"R0": 60, "R1": 25, "R2": 10, "R3": 5}
        ids = [road for road, n in planted.items() for _ in range(n)]
        rng.shuffle(ids)
        stats = mine_frequent(ids, k=4)
        assert [(s.road_id, s.trip_count) for s in stats] == \
            sorted(planted.items(), key=lambda kv: -kv[1])

    def test_counts_match_brute_force(self):
        rng = np.random.default_rng(42)
        ids = [f"R{int(rng.integers(6))}" for _ in range(500)]
        stats = mine_frequent(ids, k=6)
        assert sum(s.trip_count for s in stats) == len(ids)
        for s in stats:
            assert s.trip_count == ids.count(s.road_id)

    def test_k_validation(self):
        with pytest.raises(ValidationError):
            mine_frequent(["A"], k=0)


def one_trip(start_ts, coords=None, duration_s=600):
    records = trip_records(start_ts=start_ts, coords=coords,
                           step_s=duration_s // 2)
    trips, _ = segment_trips(records)
    assert len(trips) == 1
    return trips[0]


class TestFeaturize:
    def test_calendar_fields_from_local_start(self):
        # 2019-06-03 08:15:30 local time is a Monday
        trip = one_trip(local_epoch(2019, 6, 3, 8, 15, 30))
        v = featurize(trip, vehicle_key=3)
        assert v.day_of_week == 1
        assert v.day_of_month == 3
        assert v.month_of_year == 6
        assert v.dep_minute == 15
        assert v.dep_second == 30
        assert v.vehicle_key == 3
        assert v.target_duration_s == trip.duration_s

    def test_round_trip_endpoints_equal(self):
        coords = [(0.0, 0.0), (0.0, 0.005), (0.0, 0.0)]
        trip = one_trip(local_epoch(2019, 6, 3, 9, 0, 0), coords=coords)
        v = featurize(trip, 1)
        assert v.start_lat == v.end_lat
        assert v.start_lon == v.end_lon

    def test_avg_speed_feature(self):
        # one equatorial degree in one hour: about 111.195 km/h
        coords = [(0.0, 0.0), (0.0, 0.5), (0.0, 1.0)]
        trip = one_trip(local_epoch(2019, 6, 3, 9, 0, 0), coords=coords,
                        duration_s=3600)
        v = featurize(trip, 1)
        assert v.trip_avg_speed_kmh == pytest.approx(111.195, abs=5e-3)

    def test_column_order(self):
        assert DATASET_COLUMNS[0] == "vehicle_key"
        assert DATASET_COLUMNS[-1] == "target_duration_s"
        assert len(DATASET_COLUMNS) == 13


class TestSplitByMonth:
    def vec(self, month):
        return FeatureVector(1, 1.0, 10.0, 0.0, 0.0, 0.0, 0.1, 0, 0, 1, 1,
                             month, 600.0)

    def test_all_april_to_train(self):
        train, test, excluded = split_by_month([self.vec(4)] * 3)
        assert (len(train), len(test), excluded) == (3, 0, 0)

    def test_all_september_to_test(self):
        train, test, excluded = split_by_month([self.vec(9)] * 2)
        assert (len(train), len(test), excluded) == (0, 2, 0)

    def test_out_of_range_months_excluded(self):
        vs = [self.vec(m) for m in (4, 5, 9, 11, 2)]
        train, test, excluded = split_by_month(vs)
        assert (len(train), len(test), excluded) == (2, 1, 2)
        assert len(train) + len(test) + excluded == len(vs)


class TestVehicleEncoder:
    def test_sorted_stable_indices(self):
        enc = VehicleEncoder().fit(["B", "A", "C", "A"])
        assert enc.encode("A") == 1
        assert enc.encode("B") == 2
        assert enc.encode("C") == 3

    def test_unseen_maps_to_reserved_zero(self):
        enc = VehicleEncoder().fit(["A"])
        assert enc.encode("ZZ") == 0

    def test_json_round_trip(self):
        enc = VehicleEncoder().fit(["A", "B"])
        back = VehicleEncoder.from_json(json.loads(json.dumps(enc.to_json())))
        assert back.mapping == enc.mapping


class TestBuildDatasets:
    def test_encoder_fit_on_train_months_only(self):
        trips = [
            one_trip(local_epoch(2019, 5, 6, 10, 0, 0)),   # train month
            one_trip(local_epoch(2019, 9, 2, 10, 0, 0)),   # test month
        ]
        # the test trip's vehicle never appears in a train month
        test_only = trip_records("V_TEST", local_epoch(2019, 9, 3, 10, 0, 0))
        trips.append(segment_trips(test_only)[0][0])
        train, test, excluded, enc = build_datasets(trips)
        assert excluded == 0
        assert len(train) == 1 and len(test) == 2
        assert enc.encode("V_TEST") == 0
        test_only_vec = [v for v in test if v.vehicle_key == 0]
        assert len(test_only_vec) == 1


class TestFeatureScaler:
    def test_constant_column_passthrough(self):
        X = np.column_stack([np.arange(4.0), np.full(4, 7.0), np.arange(4.0) * 2])
        out = FeatureScaler(passthrough_columns=()).fit(X).transform(X)
        assert np.allclose(out[:, 1], 7.0)

    def test_two_point_column_scales_to_unit(self):
        X = np.array([[0.0], [2.0]])
        out = FeatureScaler(passthrough_columns=()).fit(X).transform(X)
        assert np.allclose(out.ravel(), [-1.0, 1.0])

    def test_zero_mean_unit_std_after_fit_apply(self):
        rng = np.random.default_rng(43)
        X = rng.normal(5.0, 3.0, size=(200, 6))
        scaler = FeatureScaler(passthrough_columns=(0,)).fit(X)
        out = scaler.transform(X)
        assert np.abs(out[:, 1:].mean(axis=0)).max() < 1e-9
        assert np.abs(out[:, 1:].std(axis=0) - 1.0).max() < 1e-9
        assert np.allclose(out[:, 0], X[:, 0])  # vehicle key untouched

    def test_round_trip(self):
        rng = np.random.default_rng(44)
        X = rng.normal(size=(50, 4))
        scaler = FeatureScaler().fit(X)
        assert np.abs(scaler.inverse_transform(scaler.transform(X)) - X).max() < 1e-9

    def test_json_round_trip(self):
        rng = np.random.default_rng(45)
        X = rng.normal(size=(20, 3))
        scaler = FeatureScaler().fit(X)
        clone = FeatureScaler.from_json(json.loads(json.dumps(scaler.to_json())))
        assert np.allclose(clone.transform(X), scaler.transform(X))

    def test_unfitted_raises(self):
        with pytest.raises(NotFittedError):
            FeatureScaler().transform(np.zeros((2, 2)))

    def test_empty_train_raises(self):
        with pytest.raises(ValidationError):
            FeatureScaler().fit(np.empty((0, 3)))

    def test_sklearn_get_params(self):
        scaler = FeatureScaler(passthrough_columns=(0, 2))
        assert scaler.get_params()["passthrough_columns"] == (0, 2)


class TestDatasetCsv:
    def test_round_trip(self):
        trips = [one_trip(local_epoch(2019, 6, 3 + i, 10, 0, 0)) for i in range(3)]
        vectors = [featurize(t, i) for i, t in enumerate(trips)]
        buf = io.StringIO()
        write_dataset_csv(vectors, buf)
        buf.seek(0)
        X, y = read_dataset_csv(buf)
        X2, y2 = vectors_to_arrays(vectors)
        assert np.array_equal(X, X2)
        assert np.array_equal(y, y2)

    def test_header_validated(self):
        with pytest.raises(ValidationError):
            read_dataset_csv(io.StringIO("a,b,c\n1,2,3\n"))

    def test_feature_columns_are_twelve(self):
        assert len(FEATURE_COLUMNS) == 12


class TestFeatureVectorValidation:
    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            FeatureVector(1, math.nan, 10.0, 0, 0, 0, 0, 0, 0, 1, 1, 6, 60.0)

    def test_rejects_out_of_range_calendar(self):
        with pytest.raises(ValidationError):
            FeatureVector(1, 1.0, 10.0, 0, 0, 0, 0, 0, 0, 8, 1, 6, 60.0)

    def test_rejects_non_positive_target(self):
        with pytest.raises(ValidationError):
            FeatureVector(1, 1.0, 10.0, 0, 0, 0, 0, 0, 0, 1, 1, 6, 0.0)
