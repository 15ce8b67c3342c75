"""Batch pipeline CLI.

Subcommands mirror the pipeline stages: synth, ingest, segment, simplify,
match, mine-routes, featurize, train, evaluate, plot. Each stage reads
and writes the documented file formats, appends an entry to the run log,
and exits 0 on success; missing inputs exit 2, validation failures 3,
training divergence 4. An optional TOML config can pre-set any flag
(table per command, keys with underscores); explicit flags win.
"""

from __future__ import annotations

import csv
import datetime as dt
import functools
import json
import sys
from pathlib import Path

import click

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import ingest, mapmatch, routes, synth, trips
from .errors import (SchemaError, TrainingDiverged, TripTimeError,
                     ValidationError)
from .manifest import ManifestWriter
from .neural import (ESTIMATOR_KINDS, load_checkpoint, mae, rmse,
                     save_checkpoint)

EXIT_MISSING_INPUT = 2
EXIT_VALIDATION = 3
EXIT_DIVERGED = 4


def pipeline_errors(f):
    """Map toolkit exceptions onto the documented exit codes."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except TrainingDiverged as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DIVERGED)
        except FileNotFoundError as exc:
            click.echo(f"error: missing input: {exc}", err=True)
            sys.exit(EXIT_MISSING_INPUT)
        except (SchemaError, ValidationError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except TripTimeError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as f:
        return tomllib.load(f)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML config with one table per command.")
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False),
              default="triptime-manifest.jsonl", show_default=True,
              help="Run log receiving one JSON line per executed stage.")
@click.pass_context
def main(ctx, config_path, manifest_path):
    """Mine trips from GPS logs and predict travel time on frequent routes."""
    ctx.default_map = _load_config(config_path)
    ctx.obj = ManifestWriter(manifest_path)


def _parse_date(value: str) -> dt.date:
    return dt.date.fromisoformat(value)


def _parse_time(value: str) -> dt.time:
    return dt.time.fromisoformat(value)


@main.command("synth")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--n-vehicles", type=int, default=50, show_default=True)
@click.option("--n-trips", type=int, default=5000, show_default=True)
@click.option("--grid-rows", type=int, default=10, show_default=True)
@click.option("--grid-cols", type=int, default=10, show_default=True)
@click.option("--spacing-m", type=float, default=200.0, show_default=True)
@click.option("--n-roads", type=int, default=6, show_default=True)
@click.option("--gps-noise-m", type=float, default=5.0, show_default=True)
@click.option("--duration-noise-s", type=float, default=30.0, show_default=True)
@click.option("--base-speed-kmh", type=float, default=40.0, show_default=True)
@click.option("--start-date", default="2019-04-01", show_default=True)
@click.option("--end-date", default="2019-10-31", show_default=True)
@click.pass_obj
@pipeline_errors
def cmd_synth(manifest, out_dir, seed, n_vehicles, n_trips, grid_rows, grid_cols,
              spacing_m, n_roads, gps_noise_m, duration_noise_s, base_speed_kmh,
              start_date, end_date):
    """Generate a synthetic grid network, raw tracker CSV, and ground truth."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = synth.SynthConfig(
        seed=seed, n_vehicles=n_vehicles, n_trips=n_trips, grid_rows=grid_rows,
        grid_cols=grid_cols, spacing_m=spacing_m, n_roads=n_roads,
        gps_noise_m=gps_noise_m, duration_noise_s=duration_noise_s,
        base_speed_kmh=base_speed_kmh, start_date=_parse_date(start_date),
        end_date=_parse_date(end_date))
    raw_path = out / "raw.csv"
    net_path = out / "network.json"
    truth_path = out / "ground_truth.csv"
    with manifest.stage("synth", [], [str(raw_path), str(net_path), str(truth_path)],
                        {"seed": seed, "n_trips": n_trips, "n_roads": n_roads}) as counts:
        net = synth.gen_network(config)
        records, truth = synth.gen_logs(config, net)
        net.save(str(net_path))
        with open(raw_path, "w", encoding="utf-8") as f:
            synth.write_logs_csv(records, f)
        with open(truth_path, "w", encoding="utf-8") as f:
            synth.write_ground_truth_csv(truth, f)
        counts.update(records=len(records), trips=len(truth),
                      nodes=len(net.nodes), edges=len(net.edges))
    click.echo(f"synth: {len(records)} records, {len(truth)} trips -> {out}")


@main.command("ingest")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True)
@click.option("--rejects", "rejects_path", type=click.Path(dir_okay=False), default=None,
              help="Optional CSV listing rejected line numbers and reasons.")
@click.pass_obj
@pipeline_errors
def cmd_ingest(manifest, input_path, output_path, rejects_path):
    """Parse and validate a raw tracker CSV into records JSONL."""
    with manifest.stage("ingest", [input_path], [output_path], {}) as counts:
        records, report = ingest.parse_records(input_path)
        groups = ingest.sort_and_group(records)
        with open(output_path, "w", encoding="utf-8") as f:
            written = 0
            for vehicle_id in groups:
                written += ingest.write_records_jsonl(groups[vehicle_id], f)
        if rejects_path:
            with open(rejects_path, "w", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["line", "reason"])
                writer.writerows(report.rejections)
        counts.update(rows_total=report.total_rows, accepted=report.accepted,
                      rejected=report.rejected, vehicles=len(groups),
                      records_out=written)
    click.echo(f"ingest: {report.accepted} records accepted, "
               f"{report.rejected} rejected ({report.total_rows} rows)")


def _filter_options(f):
    f = click.option("--min-distance-km", type=float, default=0.2, show_default=True)(f)
    f = click.option("--min-points", type=int, default=2, show_default=True)(f)
    f = click.option("--max-duration-s", type=float, default=3600.0, show_default=True)(f)
    f = click.option("--window-end", default="23:00", show_default=True)(f)
    f = click.option("--window-start", default="06:00", show_default=True)(f)
    return f


def _make_filter(window_start, window_end, max_duration_s, min_points,
                 min_distance_km) -> trips.FilterConfig:
    return trips.FilterConfig(
        window_start=_parse_time(window_start), window_end=_parse_time(window_end),
        max_duration_s=max_duration_s, min_points=min_points,
        min_distance_km=min_distance_km)


@main.command("segment")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True)
@_filter_options
@click.option("--no-filter", is_flag=True, default=False,
              help="Emit every segmented trip without the cleaning filters.")
@click.pass_obj
@pipeline_errors
def cmd_segment(manifest, input_path, output_path, window_start, window_end,
                max_duration_s, min_points, min_distance_km, no_filter):
    """Segment records into ignition-delimited trips and apply cleaning filters."""
    with manifest.stage("segment", [input_path], [output_path],
                        {"no_filter": no_filter}) as counts:
        with open(input_path, "r", encoding="utf-8") as f:
            records = ingest.read_records_jsonl(f)
        groups = ingest.sort_and_group(records)
        all_trips, report = trips.segment_all(groups)
        if no_filter:
            kept, filter_report = all_trips, trips.FilterReport(kept=len(all_trips))
        else:
            config = _make_filter(window_start, window_end, max_duration_s,
                                  min_points, min_distance_km)
            kept, filter_report = trips.filter_trips(all_trips, config)
        with open(output_path, "w", encoding="utf-8") as f:
            trips.write_trips_jsonl(kept, f)
        counts.update(
            records_total=report.records_total,
            records_assigned=report.records_assigned,
            discarded_outside=report.discarded_outside,
            discarded_incomplete=report.discarded_incomplete,
            discarded_degenerate=report.discarded_degenerate,
            trips_segmented=report.trips_emitted,
            trips_kept=filter_report.kept,
            dropped_window=filter_report.dropped_window,
            dropped_duration=filter_report.dropped_duration,
            dropped_points=filter_report.dropped_points,
            dropped_distance=filter_report.dropped_distance,
        )
    click.echo(f"segment: {report.trips_emitted} trips segmented, "
               f"{filter_report.kept} kept after filters")


@main.command("simplify")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True)
@click.option("--epsilon-m", type=float, default=10.0, show_default=True)
@click.pass_obj
@pipeline_errors
def cmd_simplify(manifest, input_path, output_path, epsilon_m):
    """Reduce trip geometry with Ramer-Douglas-Peucker.

    Recorded distance/duration attributes keep describing the raw trip.
    """
    from .simplify import Epsilon, rdp_mask

    eps = Epsilon(epsilon_m)
    with manifest.stage("simplify", [input_path], [output_path],
                        {"epsilon_m": epsilon_m}) as counts:
        with open(input_path, "r", encoding="utf-8") as f:
            trip_list = trips.read_trips_jsonl(f)
        points_in = points_out = 0
        simplified = []
        for trip in trip_list:
            mask = rdp_mask([p.position for p in trip.points], eps)
            kept_points = tuple(p for p, k in zip(trip.points, mask) if k)
            points_in += len(trip.points)
            points_out += len(kept_points)
            simplified.append(trips.Trip(
                vehicle_id=trip.vehicle_id, points=kept_points,
                start_ts=trip.start_ts, end_ts=trip.end_ts,
                distance_km=trip.distance_km, duration_s=trip.duration_s,
                avg_speed_kmh=trip.avg_speed_kmh))
        with open(output_path, "w", encoding="utf-8") as f:
            trips.write_trips_jsonl(simplified, f)
        counts.update(trips=len(simplified), points_in=points_in,
                      points_out=points_out)
    click.echo(f"simplify: {points_in} -> {points_out} points "
               f"across {len(simplified)} trips (eps {epsilon_m} m)")


@main.command("match")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--network", "network_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True)
@click.option("--radius-m", type=float, default=50.0, show_default=True)
@click.option("--bearing-tol-deg", type=float, default=30.0, show_default=True)
@click.option("--remote", "remote_url", default=None,
              help="Delegate snapping to an OSRM-compatible service at this base URL.")
@click.pass_obj
@pipeline_errors
def cmd_match(manifest, input_path, network_path, output_path, radius_m,
              bearing_tol_deg, remote_url):
    """Snap trips to road-network nodes and assign each trip a road."""
    net = mapmatch.RoadNetwork.load(network_path)
    client = mapmatch.OsrmClient(remote_url) if remote_url else None
    with manifest.stage("match", [input_path, network_path], [output_path],
                        {"radius_m": radius_m, "bearing_tol_deg": bearing_tol_deg,
                         "remote": bool(remote_url)}) as counts:
        matched_n = unmatchable = points_dropped = trips_in = 0
        with open(input_path, "r", encoding="utf-8") as fin, \
                open(output_path, "w", encoding="utf-8") as fout:
            for line in fin:
                if not line.strip():
                    continue
                trips_in += 1
                trip_dict = json.loads(line)
                trip = trips.Trip.from_dict(trip_dict)
                try:
                    if client is not None:
                        matched = client.match_trip(trip.points, bearing_tol_deg)
                    else:
                        matched = mapmatch.match_trip(net, trip.points, radius_m,
                                                      bearing_tol_deg)
                except mapmatch.UnmatchableTripError:
                    unmatchable += 1
                    continue
                road_id = routes.assign_road(matched, net)
                fout.write(json.dumps(
                    mapmatch.matched_trip_dict(trip_dict, matched, road_id)) + "\n")
                matched_n += 1
                points_dropped += matched.dropped_count
        counts.update(trips_in=trips_in, trips_matched=matched_n,
                      trips_unmatchable=unmatchable, points_dropped=points_dropped)
    click.echo(f"match: {matched_n}/{trips_in} trips matched "
               f"({unmatchable} unmatchable, {points_dropped} points dropped)")


@main.command("mine-routes")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True)
@click.option("--top-k", type=int, default=6, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.pass_obj
@pipeline_errors
def cmd_mine_routes(manifest, input_path, output_path, top_k, fmt):
    """Rank roads by assigned trip count."""
    with manifest.stage("mine-routes", [input_path], [output_path],
                        {"top_k": top_k}) as counts:
        road_ids = []
        unassigned = 0
        with open(input_path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                road = json.loads(line).get("match", {}).get("road_id")
                if road is None:
                    unassigned += 1
                else:
                    road_ids.append(road)
        stats = routes.mine_frequent(road_ids, top_k)
        with open(output_path, "w", encoding="utf-8") as f:
            if fmt == "json":
                json.dump([{"road_id": s.road_id, "trip_count": s.trip_count}
                           for s in stats], f)
                f.write("\n")
            else:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["road_id", "trip_count"])
                writer.writerows((s.road_id, s.trip_count) for s in stats)
        counts.update(trips_assigned=len(road_ids), trips_unassigned=unassigned,
                      roads_reported=len(stats))
    top = ", ".join(f"{s.road_id}:{s.trip_count}" for s in stats[:3])
    click.echo(f"mine-routes: {len(road_ids)} assigned trips; top {top}")


@main.command("featurize")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--train-output", type=click.Path(dir_okay=False), required=True)
@click.option("--test-output", type=click.Path(dir_okay=False), required=True)
@click.option("--vehicles-output", type=click.Path(dir_okay=False), default=None,
              help="Where to persist the vehicle dictionary (JSON).")
@click.option("--road", "road_filter", default=None,
              help="Keep only trips matched to this road id.")
@_filter_options
@click.pass_obj
@pipeline_errors
def cmd_featurize(manifest, input_path, train_output, test_output, vehicles_output,
                  road_filter, window_start, window_end, max_duration_s, min_points,
                  min_distance_km):
    """Build the train/test feature CSVs from (matched) trips."""
    config = _make_filter(window_start, window_end, max_duration_s, min_points,
                          min_distance_km)
    with manifest.stage("featurize", [input_path], [train_output, test_output],
                        {"road": road_filter}) as counts:
        kept_dicts = []
        trips_in = road_dropped = 0
        with open(input_path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                trips_in += 1
                d = json.loads(line)
                if road_filter is not None:
                    if d.get("match", {}).get("road_id") != road_filter:
                        road_dropped += 1
                        continue
                kept_dicts.append(d)
        trip_list = [trips.Trip.from_dict(d) for d in kept_dicts]
        filtered, filter_report = trips.filter_trips(trip_list, config)
        train, test, excluded, encoder = routes.build_datasets(filtered)
        with open(train_output, "w", encoding="utf-8") as f:
            routes.write_dataset_csv(train, f)
        with open(test_output, "w", encoding="utf-8") as f:
            routes.write_dataset_csv(test, f)
        if vehicles_output:
            with open(vehicles_output, "w", encoding="utf-8") as f:
                json.dump(encoder.to_json(), f)
                f.write("\n")
        counts.update(trips_in=trips_in, road_dropped=road_dropped,
                      filter_dropped=filter_report.dropped,
                      train_rows=len(train), test_rows=len(test),
                      excluded_months=excluded)
    click.echo(f"featurize: {len(train)} train rows, {len(test)} test rows "
               f"({filter_report.dropped} filtered, {excluded} out-of-range months)")


@main.command("train")
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--model", "model_kind", type=click.Choice(sorted(ESTIMATOR_KINDS)),
              required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--epochs", type=int, default=None,
              help="Override the model's default epoch count (200 ann/mlp, 50 lstm).")
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--learning-rate", type=float, default=1e-3, show_default=True)
@click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default="adam",
              show_default=True)
@click.option("--road", "road_id", default="all", show_default=True,
              help="Road label recorded in the checkpoint metadata.")
@click.pass_obj
@pipeline_errors
def cmd_train(manifest, train_path, model_kind, output_path, seed, epochs,
              batch_size, learning_rate, optimizer, road_id):
    """Fit the feature scaler and train one model; write a checkpoint."""
    with manifest.stage("train", [train_path], [output_path],
                        {"model": model_kind, "seed": seed}) as counts:
        with open(train_path, "r", encoding="utf-8") as f:
            X, y = routes.read_dataset_csv(f)
        if X.shape[0] == 0:
            raise ValidationError("training CSV has no rows")
        scaler = routes.FeatureScaler().fit(X)
        params = {"batch_size": batch_size, "learning_rate": learning_rate,
                  "optimizer": optimizer, "seed": seed}
        if epochs is not None:
            params["epochs"] = epochs
        estimator = ESTIMATOR_KINDS[model_kind](**params)
        estimator.fit(scaler.transform(X), y)
        save_checkpoint(output_path, estimator, scaler,
                        feature_columns=routes.FEATURE_COLUMNS, road_id=road_id)
        counts.update(rows=int(X.shape[0]), epochs=len(estimator.loss_history_),
                      final_loss=estimator.loss_history_[-1])
    click.echo(f"train[{model_kind}]: {X.shape[0]} rows, "
               f"final epoch loss {estimator.loss_history_[-1]:.6f}")


@main.command("evaluate")
@click.option("--checkpoint", "checkpoint_path",
              type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True)
@click.option("--predictions", "predictions_path", type=click.Path(dir_okay=False),
              default=None, help="Optional CSV of (actual_s, predicted_s) pairs.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
@click.pass_obj
@pipeline_errors
def cmd_evaluate(manifest, checkpoint_path, test_path, output_path,
                 predictions_path, fmt):
    """Score a checkpoint on a test CSV; report RMSE and MAE in seconds."""
    with manifest.stage("evaluate", [checkpoint_path, test_path], [output_path],
                        {}) as counts:
        estimator, scaler, meta = load_checkpoint(checkpoint_path)
        with open(test_path, "r", encoding="utf-8") as f:
            X, y = routes.read_dataset_csv(f)
        if X.shape[0] == 0:
            raise ValidationError("test CSV has no rows")
        preds = estimator.predict(scaler.transform(X))
        report = {
            "model": meta["model"],
            "road_id": meta["road_id"],
            "rmse_s": rmse(y, preds),
            "mae_s": mae(y, preds),
            "n_test": int(X.shape[0]),
        }
        with open(output_path, "w", encoding="utf-8") as f:
            if fmt == "csv":
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(list(report))
                writer.writerow([report[k] for k in report])
            else:
                json.dump(report, f)
                f.write("\n")
        if predictions_path:
            with open(predictions_path, "w", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["actual_s", "predicted_s"])
                for a, p in zip(y, preds):
                    writer.writerow([repr(float(a)), repr(float(p))])
        counts.update(n_test=report["n_test"])
    click.echo(f"evaluate[{report['model']}]: rmse {report['rmse_s']:.2f} s, "
               f"mae {report['mae_s']:.2f} s over {report['n_test']} trips")


@main.command("plot")
@click.option("--predictions", "predictions_path",
              type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--trips", "trips_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.pass_obj
@pipeline_errors
def cmd_plot(manifest, predictions_path, trips_path, out_dir):
    """Render SVG plots (plus their CSVs) from predictions and/or trips."""
    from . import plotting

    if not predictions_path and not trips_path:
        raise ValidationError("plot needs --predictions and/or --trips")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    inputs = [p for p in (predictions_path, trips_path) if p]
    with manifest.stage("plot", inputs, outputs, {}) as counts:
        if predictions_path:
            actual, predicted = [], []
            with open(predictions_path, "r", encoding="utf-8") as f:
                reader = csv.DictReader(f)
                for row in reader:
                    actual.append(float(row["actual_s"]))
                    predicted.append(float(row["predicted_s"]))
            if not actual:
                raise ValidationError("predictions CSV has no rows")
            svg = out / "actual_vs_predicted.svg"
            csv_path = out / "actual_vs_predicted.csv"
            plotting.render_scatter(actual, predicted, str(svg))
            with open(csv_path, "w", encoding="utf-8") as f:
                plotting.write_scatter_csv(actual, predicted, f)
            outputs += [str(svg), str(csv_path)]
            counts["scatter_points"] = len(actual)
        if trips_path:
            with open(trips_path, "r", encoding="utf-8") as f:
                trip_list = trips.read_trips_jsonl(f)
            rows = plotting.weekday_aggregates(trip_list)
            svg = out / "weekday_aggregates.svg"
            csv_path = out / "weekday_aggregates.csv"
            plotting.render_weekday_bars(rows, str(svg))
            with open(csv_path, "w", encoding="utf-8") as f:
                plotting.write_weekday_csv(rows, f)
            outputs += [str(svg), str(csv_path)]
            counts["weekday_trips"] = sum(r["trips"] for r in rows)
    click.echo(f"plot: wrote {', '.join(Path(p).name for p in outputs)} in {out}")


if __name__ == "__main__":
    main()
