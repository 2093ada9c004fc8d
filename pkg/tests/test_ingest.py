import numpy as np
import pytest

from evdispatch.core import GeoPoint, Rect, Region, distance
from evdispatch.ingest import (IngestError, bin_demand, estimate_avg_trip,
                               estimate_fleet_size, minutes_since_epoch,
                               parse_stations, parse_trips, write_trips_csv,
                               TripRecord)

HEADER = "pickup_datetime,dropoff_datetime,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon\n"

REGIONS = [
    Region(0, GeoPoint(40.71, -74.0), Rect(40.70, -74.01, 40.72, -73.99), 2.0),
    Region(1, GeoPoint(40.75, -73.96), Rect(40.74, -73.97, 40.76, -73.95), 2.0),
]


def row(pu, do, plat, plon, dlat, dlon):
    return f"{pu},{do},{plat},{plon},{dlat},{dlon}\n"


class TestParseTrips:
    def test_well_formed(self, tmp_path):
        p = tmp_path / "trips.csv"
        p.write_text(HEADER
                     + row("2016-01-04 00:03:00", "2016-01-04 00:13:00",
                           40.71, -74.0, 40.75, -73.96)
                     + row("2016-01-04 00:07:00", "2016-01-04 00:20:00",
                           40.711, -74.001, 40.75, -73.96)
                     + row("2016-01-04 10:00:00", "2016-01-04 10:09:00",
                           40.75, -73.96, 40.71, -74.0))
        trips, rep = parse_trips(p)
        assert (rep.total, rep.kept, rep.dropped) == (3, 3, 0)
        assert trips[0].pickup_time < trips[1].pickup_time

    def test_malformed_row_dropped(self, tmp_path):
        p = tmp_path / "trips.csv"
        p.write_text(HEADER
                     + row("2016-01-04 00:03:00", "2016-01-04 00:13:00",
                           "abc", -74.0, 40.75, -73.96)
                     + row("2016-01-04 00:05:00", "2016-01-04 00:13:00",
                           40.71, -74.0, 40.75, -73.96))
        trips, rep = parse_trips(p)
        assert rep.dropped == 1
        assert rep.kept == 1

    def test_empty_file_with_header(self, tmp_path):
        p = tmp_path / "trips.csv"
        p.write_text(HEADER)
        trips, rep = parse_trips(p)
        assert trips == [] and rep.total == 0

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestError, match="not found"):
            parse_trips(tmp_path / "nope.csv")

    def test_missing_column_named(self, tmp_path):
        p = tmp_path / "trips.csv"
        p.write_text("pickup_datetime,dropoff_datetime,pickup_lat,pickup_lon,dropoff_lat\n")
        with pytest.raises(IngestError, match="dropoff_lon"):
            parse_trips(p)

    def test_dropoff_before_pickup_dropped(self, tmp_path):
        p = tmp_path / "trips.csv"
        p.write_text(HEADER + row("2016-01-04 01:00:00", "2016-01-04 00:00:00",
                                  40.71, -74.0, 40.75, -73.96))
        _, rep = parse_trips(p)
        assert rep.dropped == 1

    def test_bbox_filter(self, tmp_path):
        p = tmp_path / "trips.csv"
        p.write_text(HEADER + row("2016-01-04 00:00:00", "2016-01-04 00:10:00",
                                  50.0, -74.0, 40.75, -73.96))
        _, rep = parse_trips(p, Rect(40.0, -75.0, 41.0, -73.0))
        assert rep.dropped == 1

    def test_roundtrip(self, tmp_path):
        trips = [TripRecord(minutes_since_epoch("2016-01-04 00:03:00"),
                            minutes_since_epoch("2016-01-04 00:13:00"),
                            GeoPoint(40.71, -74.0), GeoPoint(40.75, -73.96))]
        p = tmp_path / "out.csv"
        write_trips_csv(p, trips)
        back, rep = parse_trips(p)
        assert rep.kept == 1
        assert abs(back[0].pickup_time - trips[0].pickup_time) < 1e-6


class TestParseStations:
    def test_parse(self, tmp_path):
        p = tmp_path / "stations.csv"
        p.write_text("station_id,lat,lon,num_chargers\n0,40.71,-74.0,2\n1,40.75,-73.96,1\n")
        stations = parse_stations(p)
        assert [s.id for s in stations] == [0, 1]
        assert stations[0].num_chargers == 2

    def test_missing_column(self, tmp_path):
        p = tmp_path / "stations.csv"
        p.write_text("station_id,lat,lon\n")
        with pytest.raises(IngestError, match="num_chargers"):
            parse_stations(p)


def trip(minute, lat, lon, dlat=40.75, dlon=-73.96, dur=10.0):
    base = minutes_since_epoch("2016-01-04 00:00:00")
    return TripRecord(base + minute, base + minute + dur,
                      GeoPoint(lat, lon), GeoPoint(dlat, dlon))


class TestBinDemand:
    def test_hand_binning(self):
        trips = [trip(3.0, 40.71, -74.0), trip(7.0, 40.71, -74.0)]
        series = bin_demand(trips, REGIONS, 10.0)
        assert series.counts[0, 0, 0] == 2

    def test_outside_regions_excluded(self):
        trips = [trip(3.0, 40.60, -74.0)]
        series = bin_demand(trips, REGIONS, 10.0)
        assert series.counts.sum() == 0

    def test_boundary_goes_to_next_window(self):
        trips = [trip(10.0, 40.71, -74.0)]
        series = bin_demand(trips, REGIONS, 10.0)
        assert series.counts[0, 0, 0] == 0
        assert series.counts[0, 1, 0] == 1

    def test_sum_bounded_by_total(self):
        rng = np.random.default_rng(0)
        trips = [trip(float(rng.uniform(0, 1440)),
                      float(rng.uniform(40.60, 40.80)),
                      float(rng.uniform(-74.05, -73.90))) for _ in range(200)]
        series = bin_demand(trips, REGIONS, 10.0)
        assert series.counts.sum() <= len(trips)

    def test_delta_t_must_divide_day(self):
        with pytest.raises(ValueError):
            bin_demand([trip(1.0, 40.71, -74.0)], REGIONS, 7.0)

    def test_deterministic(self):
        trips = [trip(float(m), 40.71, -74.0) for m in range(0, 120, 7)]
        a = bin_demand(trips, REGIONS, 10.0)
        b = bin_demand(trips, REGIONS, 10.0)
        assert np.array_equal(a.counts, b.counts)


class TestEstimators:
    def test_avg_trip_mean(self):
        # construct trips with known 2 km and 4 km lengths from region 0
        start = GeoPoint(40.71, -74.0)
        t2 = TripRecord(0.0, 10.0, start,
                        GeoPoint(start.lat + 2.0 / 111.194926644, start.lon))
        t4 = TripRecord(0.0, 10.0, start,
                        GeoPoint(start.lat + 4.0 / 111.194926644, start.lon))
        est = estimate_avg_trip([t2, t4], REGIONS[0])
        assert abs(est - (distance(t2.pickup, t2.dropoff)
                          + distance(t4.pickup, t4.dropoff)) / 2.0) < 1e-12
        assert abs(est - 3.0) < 1e-6

    def test_avg_trip_single(self):
        start = GeoPoint(40.71, -74.0)
        t5 = TripRecord(0.0, 10.0, start,
                        GeoPoint(start.lat + 5.0 / 111.194926644, start.lon))
        assert abs(estimate_avg_trip([t5], REGIONS[0]) - 5.0) < 1e-6

    def test_avg_trip_empty_errors(self):
        with pytest.raises(ValueError, match="fallback"):
            estimate_avg_trip([], REGIONS[0])

    def test_fleet_size_counts_dropoffs(self):
        base = minutes_since_epoch("2016-01-04 00:00:00")
        trips = [trip(float(m), 40.71, -74.0, dur=5.0) for m in range(7)]
        # dropoffs at minutes 5..11: window [0, 10) catches 5 of them
        assert estimate_fleet_size(trips, base, 10.0) == 5

    def test_fleet_size_zero(self):
        base = minutes_since_epoch("2016-01-04 00:00:00")
        assert estimate_fleet_size([], base, 10.0) == 0

    def test_dropoff_at_window_end_counts_next(self):
        base = minutes_since_epoch("2016-01-04 00:00:00")
        t = trip(5.0, 40.71, -74.0, dur=5.0)   # dropoff exactly at minute 10
        assert estimate_fleet_size([t], base, 10.0) == 0
        assert estimate_fleet_size([t], base + 10.0, 10.0) == 1
