"""Trip-record and station CSV ingestion, demand binning, parameter estimation.

Trip CSV schema (exact header):
    pickup_datetime,dropoff_datetime,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon
Station CSV schema:
    station_id,lat,lon,num_chargers
Timestamps are ISO-8601 and converted to minutes since the Unix epoch
(naive, no timezone math). Malformed rows are counted and skipped; a missing
required column is fatal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ChargingStation, GeoPoint, Rect, Region, distance

TRIP_COLUMNS = ("pickup_datetime", "dropoff_datetime",
                "pickup_lat", "pickup_lon", "dropoff_lat", "dropoff_lon")
STATION_COLUMNS = ("station_id", "lat", "lon", "num_chargers")

MINUTES_PER_DAY = 1440.0


class IngestError(Exception):
    """Fatal ingestion problem (missing file or column)."""


@dataclass(frozen=True)
class TripRecord:
    pickup_time: float   # minutes since epoch
    dropoff_time: float
    pickup: GeoPoint
    dropoff: GeoPoint


@dataclass(frozen=True)
class ParseReport:
    total: int
    kept: int
    dropped: int


@dataclass(frozen=True)
class DemandSeries:
    """Observed per-window demand counts.

    counts has shape (n_days, windows_per_day, n_regions); day 0 starts at
    base_minute (midnight of the earliest pickup). Each cell is the number
    of trips picked up inside the region during that window.
    """

    counts: np.ndarray
    windows_per_day: int
    base_minute: float

    @property
    def n_days(self) -> int:
        return self.counts.shape[0]

    @property
    def n_regions(self) -> int:
        return self.counts.shape[2]


def minutes_since_epoch(stamp: str) -> float:
    dt = datetime.fromisoformat(stamp)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp() / 60.0


def epoch_minutes_to_iso(minute: float) -> str:
    dt = datetime.fromtimestamp(minute * 60.0, tz=timezone.utc)
    return dt.replace(tzinfo=None).isoformat(sep=" ")


def parse_trips(path: str | Path,
                bbox: Rect | None = None) -> tuple[list[TripRecord], ParseReport]:
    """Parse a trip CSV, dropping malformed or out-of-bbox rows.

    Never raises on bad data rows; raises IngestError for a missing file or
    a missing required column (named in the message).
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"trip file not found: {path}")
    records: list[TripRecord] = []
    total = dropped = 0
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in TRIP_COLUMNS:
            if col not in header:
                raise IngestError(f"trip file {path} missing required column: {col}")
        for row in reader:
            total += 1
            try:
                pt = minutes_since_epoch(row["pickup_datetime"])
                dt = minutes_since_epoch(row["dropoff_datetime"])
                pickup = GeoPoint(float(row["pickup_lat"]), float(row["pickup_lon"]))
                dropoff = GeoPoint(float(row["dropoff_lat"]), float(row["dropoff_lon"]))
            except (ValueError, TypeError):
                dropped += 1
                continue
            if dt < pt:
                dropped += 1
                continue
            if bbox is not None and not (bbox.contains(pickup) and bbox.contains(dropoff)):
                dropped += 1
                continue
            records.append(TripRecord(pt, dt, pickup, dropoff))
    return records, ParseReport(total, len(records), dropped)


def parse_stations(path: str | Path) -> list[ChargingStation]:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"station file not found: {path}")
    stations: list[ChargingStation] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in STATION_COLUMNS:
            if col not in header:
                raise IngestError(f"station file {path} missing required column: {col}")
        for row in reader:
            stations.append(ChargingStation(
                int(row["station_id"]),
                GeoPoint(float(row["lat"]), float(row["lon"])),
                int(row["num_chargers"])))
    return stations


def region_of(point: GeoPoint, regions: Sequence[Region]) -> int | None:
    """Index of the first region (by id order) containing the point."""
    for region in sorted(regions, key=lambda r: r.id):
        if region.bounds.contains(point):
            return region.id
    return None


def bin_demand(trips: Sequence[TripRecord], regions: Sequence[Region],
               delta_t_min: float) -> DemandSeries:
    """Count pickups per (day, window, region); half-open window intervals.

    delta_t_min must divide 24 h. Trips outside every region are excluded.
    A pickup at an exact boundary belongs to the later window.
    """
    windows_per_day = MINUTES_PER_DAY / delta_t_min
    if abs(windows_per_day - round(windows_per_day)) > 1e-9:
        raise ValueError(f"delta_t_min {delta_t_min} does not divide 24 h")
    windows_per_day = int(round(windows_per_day))
    n_regions = len(regions)
    if not trips:
        return DemandSeries(np.zeros((0, windows_per_day, n_regions), dtype=np.int64),
                            windows_per_day, 0.0)
    first = min(t.pickup_time for t in trips)
    last = max(t.pickup_time for t in trips)
    base = (first // MINUTES_PER_DAY) * MINUTES_PER_DAY
    n_days = int((last - base) // MINUTES_PER_DAY) + 1
    counts = np.zeros((n_days, windows_per_day, n_regions), dtype=np.int64)
    for trip in trips:
        rid = region_of(trip.pickup, regions)
        if rid is None:
            continue
        offset = trip.pickup_time - base
        day = int(offset // MINUTES_PER_DAY)
        slot = int((offset - day * MINUTES_PER_DAY) // delta_t_min)
        counts[day, slot, rid] += 1
    return DemandSeries(counts, windows_per_day, base)


def estimate_avg_trip(trips: Sequence[TripRecord], region: Region) -> float:
    """Mean pickup->dropoff distance over trips starting in the region."""
    dists = [distance(t.pickup, t.dropoff) for t in trips
             if region.bounds.contains(t.pickup)]
    if not dists:
        raise ValueError(
            f"no trips originate in region {region.id}; "
            "use the configured fallback average trip distance")
    return float(np.mean(dists))


def estimate_fleet_size(trips: Sequence[TripRecord], window_start: float,
                        delta_t_min: float) -> int:
    """Number of trips completed during [window_start, window_start + dT).

    Serves as the per-window idle-fleet estimate; a dropoff exactly at the
    window end counts toward the next window.
    """
    end = window_start + delta_t_min
    return sum(1 for t in trips if window_start <= t.dropoff_time < end)


def write_trips_csv(path: str | Path, trips: Sequence[TripRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIP_COLUMNS)
        for t in trips:
            writer.writerow([
                epoch_minutes_to_iso(t.pickup_time),
                epoch_minutes_to_iso(t.dropoff_time),
                f"{t.pickup.lat:.6f}", f"{t.pickup.lon:.6f}",
                f"{t.dropoff.lat:.6f}", f"{t.dropoff.lon:.6f}",
            ])


def write_stations_csv(path: str | Path, stations: Sequence[ChargingStation]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATION_COLUMNS)
        for s in stations:
            writer.writerow([s.id, f"{s.loc.lat:.6f}", f"{s.loc.lon:.6f}", s.num_chargers])
