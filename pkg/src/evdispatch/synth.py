"""Synthetic desk-scale world: demand, trips, and charging stations.

Demand per (region, window) is a Poisson mixture: a diurnal base rate per
region and day type, inflated or deflated by a two-point regime draw, then
a Poisson count. The regime mixing makes window counts overdispersed, which
is what gives scenario-based guidance an edge over point forecasts. Region
profiles are deliberately out of phase (office mornings vs nightlife
evenings) so idle fleets go stale without relocation.

Stations are placed around region centres with heterogeneous charger
counts: half the regions get well-equipped stations, half get single
chargers, so candidate sets near different destinations carry genuinely
different expected waits.

The synthetic calendar starts on Monday 2016-01-04 and assigns train and
simulation days to real weekday/weekend dates so that calendar-based day
typing works the same as for ingested data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .config import Config
from .core import ChargingStation, GeoPoint, Rect, distance
from .ingest import MINUTES_PER_DAY, TripRecord
from .seeds import (STREAM_SYNTH_DEMAND, STREAM_SYNTH_STATIONS,
                    STREAM_SYNTH_TRIPS, rng_stream)

BASE_DATE = datetime(2016, 1, 4, tzinfo=timezone.utc)   # a Monday
BASE_MINUTE = BASE_DATE.timestamp() / 60.0

# Demand regimes are drawn per (region, 3-hour block): most blocks run
# busy, a minority go nearly dead, with unit mean overall. Within-day
# regime persistence with abrupt block switches is what distinguishes a
# distribution-aware dispatcher from a point forecaster: the scenario set
# prices both regimes every window, while any smoothed point estimate
# chases the previous block across every switch.
REGIME_HI_PROB = 0.85
REGIME_LO = 0.05
REGIME_HI = (1.0 - (1.0 - REGIME_HI_PROB) * REGIME_LO) / REGIME_HI_PROB
REGIME_BLOCK_HOURS = 2
BASE_RATE = 4.5
SAME_REGION_DEST_PROB = 0.35


@dataclass(frozen=True)
class SynthDay:
    date_index: int          # days since BASE_DATE
    day_type: str            # "weekday" | "weekend"
    trips: list[TripRecord]


@dataclass(frozen=True)
class SynthWorld:
    stations: list[ChargingStation]
    train_days: list[SynthDay]
    sim_days: list[SynthDay]

    @property
    def train_trips(self) -> list[TripRecord]:
        return [t for day in self.train_days for t in day.trips]


def day_type_of(date_index: int) -> str:
    return "weekday" if (BASE_DATE + timedelta(days=date_index)).weekday() < 5 else "weekend"


def _profile(region_idx: int, day_type: str, hour: float) -> float:
    """Diurnal demand shape; regions peak at different hours on purpose."""
    morning = math.exp(-((hour - 8.0) / 1.3) ** 2)
    evening = math.exp(-((hour - 18.0) / 1.6) ** 2)
    midday = math.exp(-((hour - 13.0) / 2.0) ** 2)
    kind = region_idx % 4
    if day_type == "weekday":
        weights = [
            (3.8, 0.5, 0.3, 0.03),   # office
            (0.2, 3.6, 0.4, 0.03),   # nightlife
            (0.5, 0.7, 2.3, 0.03),   # shopping
            (1.3, 1.3, 0.5, 0.04),   # residential
        ][kind]
    else:
        weights = [
            (0.1, 0.4, 0.8, 0.03),
            (0.1, 3.6, 0.5, 0.04),
            (0.2, 0.6, 3.2, 0.04),
            (0.1, 1.0, 1.4, 0.05),
        ][kind]
    return (weights[0] * morning + weights[1] * evening
            + weights[2] * midday + weights[3])


def demand_rate(cfg: Config, region_idx: int, day_type: str, slot: int) -> float:
    hour = slot * cfg.delta_t_min / 60.0
    return BASE_RATE * cfg.demand_scale * _profile(region_idx, day_type, hour)


def make_stations(cfg: Config, seed: int) -> list[ChargingStation]:
    """Stations near region centres with uneven charger capacity.

    Even-index regions get well-equipped stations, odd-index regions single
    chargers, so charge queues concentrate around half the destinations and
    expected waits genuinely differ between candidate sets. Leftover station
    budget scatters single chargers between the regions.
    """
    rng = rng_stream(seed, STREAM_SYNTH_STATIONS)
    stations: list[ChargingStation] = []
    sid = 0
    n_regions = len(cfg.regions)
    per_region = max(1, (cfg.synth_stations - 2) // n_regions)
    for ri, rect in enumerate(cfg.regions):
        rich = ri % 2 == 0
        corners = [(rect.min_lat, rect.min_lon), (rect.max_lat, rect.max_lon),
                   (rect.min_lat, rect.max_lon), (rect.max_lat, rect.min_lon)]
        for k in range(per_region):
            # at outer region corners: charged EVs come back to rest away
            # from the POI where demand concentrates, so repositioning
            # stays consequential
            clat, clon = corners[k % 4]
            lat = clat + math.copysign(0.003, clat - rect.center.lat) \
                + float(rng.uniform(-0.002, 0.002))
            lon = clon + math.copysign(0.004, clon - rect.center.lon) \
                + float(rng.uniform(-0.002, 0.002))
            chargers = int(rng.choice([3, 4])) if rich else 1
            stations.append(ChargingStation(sid, GeoPoint(lat, lon), chargers))
            sid += 1
    lat_mid = (cfg.bbox.min_lat + cfg.bbox.max_lat) / 2.0
    lon_mid = (cfg.bbox.min_lon + cfg.bbox.max_lon) / 2.0
    while sid < cfg.synth_stations:
        lat = lat_mid + float(rng.uniform(-0.02, 0.02))
        lon = lon_mid + float(rng.uniform(-0.03, 0.03))
        stations.append(ChargingStation(sid, GeoPoint(lat, lon), 1))
        sid += 1
    return stations


def _uniform_point(rng: np.random.Generator, rect: Rect) -> GeoPoint:
    return GeoPoint(float(rng.uniform(rect.min_lat, rect.max_lat)),
                    float(rng.uniform(rect.min_lon, rect.max_lon)))


def _poi_clustered_point(rng: np.random.Generator, rect: Rect) -> GeoPoint:
    """Pickup points concentrate around the region's POI (its centre),
    Gaussian with ~0.4 km spread clipped to the rectangle."""
    c = rect.center
    lat = float(np.clip(rng.normal(c.lat, 0.0033), rect.min_lat, rect.max_lat))
    lon = float(np.clip(rng.normal(c.lon, 0.0044), rect.min_lon, rect.max_lon))
    return GeoPoint(lat, lon)


def make_day_trips(cfg: Config, seed: int, date_index: int) -> list[TripRecord]:
    """All trips of one synthetic calendar day, deterministic per (seed, date)."""
    day_type = day_type_of(date_index)
    rng = rng_stream(seed, STREAM_SYNTH_DEMAND, date_index)
    trip_rng = rng_stream(seed, STREAM_SYNTH_TRIPS, date_index)
    day_start = BASE_MINUTE + date_index * MINUTES_PER_DAY
    n_regions = len(cfg.regions)
    slots_per_block = int(REGIME_BLOCK_HOURS * 60 / cfg.delta_t_min)
    n_blocks = (cfg.windows_per_day + slots_per_block - 1) // slots_per_block
    regimes = [[REGIME_HI if rng.uniform() < REGIME_HI_PROB else REGIME_LO
                for _ in range(n_blocks)] for _ in range(n_regions)]
    trips: list[TripRecord] = []
    for slot in range(cfg.windows_per_day):
        for ri in range(n_regions):
            lam = demand_rate(cfg, ri, day_type, slot)
            count = int(rng.poisson(lam * regimes[ri][slot // slots_per_block]))
            for _ in range(count):
                origin = _poi_clustered_point(trip_rng, cfg.regions[ri])
                if trip_rng.uniform() < SAME_REGION_DEST_PROB:
                    dest_region = ri
                else:
                    dest_region = int(trip_rng.integers(0, n_regions))
                dest = _uniform_point(trip_rng, cfg.regions[dest_region])
                pickup = day_start + slot * cfg.delta_t_min \
                    + float(trip_rng.uniform(0.0, cfg.delta_t_min))
                duration = 60.0 * distance(origin, dest) / cfg.gamma_kmh
                trips.append(TripRecord(pickup, pickup + duration, origin, dest))
    trips.sort(key=lambda t: (t.pickup_time, t.pickup.lat, t.pickup.lon))
    return trips


def _calendar(cfg: Config) -> tuple[list[int], list[int]]:
    """(train date indices, sim date indices) walked off the base Monday."""
    train_we = max(8, cfg.synth_train_days // 3)
    train_wd = cfg.synth_train_days - train_we
    quotas = {
        ("train", "weekday"): train_wd,
        ("train", "weekend"): train_we,
        ("sim", "weekday"): cfg.synth_sim_weekdays,
        ("sim", "weekend"): cfg.synth_sim_weekends,
    }
    train: list[int] = []
    sim: list[int] = []
    date = 0
    while any(q > 0 for q in quotas.values()):
        dt = day_type_of(date)
        if quotas[("train", dt)] > 0:
            quotas[("train", dt)] -= 1
            train.append(date)
        elif quotas[("sim", dt)] > 0:
            quotas[("sim", dt)] -= 1
            sim.append(date)
        date += 1
    return train, sim


def build_world(cfg: Config, seed: int) -> SynthWorld:
    """Deterministic synthetic world for a (config, seed) pair."""
    train_dates, sim_dates = _calendar(cfg)
    stations = make_stations(cfg, seed)
    train_days = [SynthDay(d, day_type_of(d), make_day_trips(cfg, seed, d))
                  for d in train_dates]
    sim_days = [SynthDay(d, day_type_of(d), make_day_trips(cfg, seed, d))
                for d in sim_dates]
    return SynthWorld(stations, train_days, sim_days)
