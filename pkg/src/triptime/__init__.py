"""triptime: mine vehicle trips from GPS logs and predict travel time.

Pipeline stages live in their own modules: ingest (raw CSV to records),
trips (ignition segmentation and cleaning), simplify (RDP geometry
reduction), mapmatch (bearing-constrained nearest-node snapping),
routes (frequent-route mining and the learning dataset), neural (the
from-scratch regressors), and synth (a deterministic test world). The
cli module chains them as batch commands.
"""

from .errors import (DegenerateTripError, RemoteRejectionError, SchemaError,
                     TrainingDiverged, TransportError, TripTimeError,
                     UndefinedBearingError, UnmatchableTripError, ValidationError)
from .geo import GeoPoint, angle_diff_deg, bearing_deg, haversine_km, perp_deviation_m
from .ingest import (LOCAL_TZ, ColumnMap, EventReason, GpsRecord, parse_records,
                     sort_and_group)
from .mapmatch import (MatchedTrajectory, NodeIndex, OsrmClient, RoadNetwork,
                       build_index, match_point, match_trip)
from .neural import (AnnRegressor, LstmRegressor, MlpRegressor, TrainConfig,
                     load_checkpoint, mae, rmse, save_checkpoint)
from .routes import (FeatureScaler, FeatureVector, RouteStat, VehicleEncoder,
                     assign_road, build_datasets, featurize, mine_frequent,
                     split_by_month)
from .simplify import Epsilon, polyline_deviation_m, rdp, rdp_mask
from .synth import SynthConfig, gen_logs, gen_network, planted_counts
from .trips import (FilterConfig, SegmentReport, Trip, compute_attributes,
                    filter_trips, segment_all, segment_trips)

__version__ = "0.1.0"

__all__ = [
    "AnnRegressor", "ColumnMap", "DegenerateTripError", "Epsilon", "EventReason",
    "FeatureScaler", "FeatureVector", "FilterConfig", "GeoPoint", "GpsRecord",
    "LOCAL_TZ", "LstmRegressor", "MatchedTrajectory", "MlpRegressor", "NodeIndex",
    "OsrmClient", "RemoteRejectionError", "RoadNetwork", "RouteStat", "SchemaError",
    "SegmentReport", "SynthConfig", "TrainConfig", "TrainingDiverged",
    "TransportError", "Trip", "TripTimeError", "UndefinedBearingError",
    "UnmatchableTripError", "ValidationError", "VehicleEncoder", "angle_diff_deg",
    "assign_road", "bearing_deg", "build_datasets", "build_index",
    "compute_attributes", "featurize", "filter_trips", "gen_logs", "gen_network",
    "haversine_km", "load_checkpoint", "mae", "match_point", "match_trip",
    "mine_frequent", "parse_records", "perp_deviation_m", "planted_counts",
    "polyline_deviation_m", "rdp", "rdp_mask", "rmse", "save_checkpoint",
    "segment_all", "segment_trips", "sort_and_group", "split_by_month",
    "__version__",
]
