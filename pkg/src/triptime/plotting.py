"""Report plots: actual-vs-predicted scatter and weekday aggregate bars.

Plots are written as self-contained SVG next to a CSV of the plotted
numbers, so downstream tooling never has to re-derive them from the SVG.
"""

from __future__ import annotations

import csv
from typing import IO, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "triptime"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .trips import Trip

WEEKDAY_LABELS = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]


def render_scatter(actual: Sequence[float], predicted: Sequence[float],
                   svg_path: str, title: str = "Actual vs predicted duration") -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.scatter(actual, predicted, s=8, alpha=0.5, edgecolors="none")
    lo = min(min(actual), min(predicted))
    hi = max(max(actual), max(predicted))
    ax.plot([lo, hi], [lo, hi], color="firebrick", linewidth=1)
    ax.set_xlabel("actual duration (s)")
    ax.set_ylabel("predicted duration (s)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_scatter_csv(actual: Sequence[float], predicted: Sequence[float],
                      handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["actual_s", "predicted_s"])
    for a, p in zip(actual, predicted):
        writer.writerow([repr(float(a)), repr(float(p))])


def weekday_aggregates(trips: Sequence[Trip]) -> list[dict]:
    """Per-weekday trip count and mean distance/duration/speed."""
    buckets: dict[int, list[Trip]] = {d: [] for d in range(1, 8)}
    for trip in trips:
        buckets[trip.start_local().isoweekday()].append(trip)
    rows = []
    for day in range(1, 8):
        group = buckets[day]
        n = len(group)
        rows.append({
            "weekday": WEEKDAY_LABELS[day - 1],
            "trips": n,
            "mean_distance_km": sum(t.distance_km for t in group) / n if n else 0.0,
            "mean_duration_s": sum(t.duration_s for t in group) / n if n else 0.0,
            "mean_avg_speed_kmh": sum(t.avg_speed_kmh for t in group) / n if n else 0.0,
        })
    return rows


def render_weekday_bars(rows: Sequence[dict], svg_path: str) -> None:
    labels = [r["weekday"] for r in rows]
    panels = [
        ("trips", "Number of trips"),
        ("mean_distance_km", "Mean distance (km)"),
        ("mean_duration_s", "Mean duration (s)"),
        ("mean_avg_speed_kmh", "Mean avg speed (km/h)"),
    ]
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    for ax, (key, title) in zip(axes.ravel(), panels):
        ax.bar(labels, [r[key] for r in rows], color="steelblue")
        ax.set_title(title)
        ax.tick_params(axis="x", labelsize=8)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_weekday_csv(rows: Sequence[dict], handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["weekday", "trips", "mean_distance_km", "mean_duration_s",
                     "mean_avg_speed_kmh"])
    for r in rows:
        writer.writerow([r["weekday"], r["trips"], repr(r["mean_distance_km"]),
                         repr(r["mean_duration_s"]), repr(r["mean_avg_speed_kmh"])])
