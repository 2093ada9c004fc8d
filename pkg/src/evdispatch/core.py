"""Domain types and geometry shared by every other module.

Coordinates are WGS84 degrees. All distances are kilometres computed by an
equirectangular projection (locally planar, Earth radius 6371 km), which is
what makes "Euclidean distance on coordinates" dimensionally meaningful at
city scale. Times are minutes; state of charge is a battery fraction in
[0, 1]; battery consumption rates are fraction-of-battery per km.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

EARTH_RADIUS_KM = 6371.0


class EvStatus(enum.Enum):
    IDLE = "idle"
    GUIDED = "guided"
    SERVING = "serving"
    TRAVELING_TO_CS = "traveling_to_cs"
    CHARGING = "charging"


# Closed transition graph. GUIDED->IDLE covers guided-but-unmatched EVs,
# IDLE->SERVING covers matches without a prior guidance move, and
# SERVING->IDLE covers runs configured to skip post-trip charging.
ALLOWED_TRANSITIONS: dict[EvStatus, frozenset[EvStatus]] = {
    EvStatus.IDLE: frozenset({EvStatus.GUIDED, EvStatus.SERVING}),
    EvStatus.GUIDED: frozenset({EvStatus.SERVING, EvStatus.IDLE}),
    EvStatus.SERVING: frozenset({EvStatus.TRAVELING_TO_CS, EvStatus.IDLE}),
    EvStatus.TRAVELING_TO_CS: frozenset({EvStatus.CHARGING}),
    EvStatus.CHARGING: frozenset({EvStatus.IDLE}),
}


def check_transition(old: EvStatus, new: EvStatus) -> None:
    """Raise ValueError on any status edge outside the allowed graph."""
    if new not in ALLOWED_TRANSITIONS[old]:
        raise ValueError(f"illegal EV status transition {old.value} -> {new.value}")


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned lat/lon rectangle, closed on all edges."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self) -> None:
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise ValueError("rectangle has negative extent")

    def contains(self, p: GeoPoint) -> bool:
        return (self.min_lat <= p.lat <= self.max_lat
                and self.min_lon <= p.lon <= self.max_lon)

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.min_lat + self.max_lat) / 2.0,
                        (self.min_lon + self.max_lon) / 2.0)


@dataclass(frozen=True)
class Region:
    """Ride-hailing service region anchored at a POI."""

    id: int
    poi: GeoPoint
    bounds: Rect
    avg_trip_km: float

    def __post_init__(self) -> None:
        if not self.bounds.contains(self.poi):
            raise ValueError(f"region {self.id}: POI outside bounds")
        if self.avg_trip_km <= 0.0:
            raise ValueError(f"region {self.id}: avg_trip_km must be positive")


@dataclass(frozen=True)
class Ev:
    """One electric vehicle.

    soc is a battery fraction; consumption_rate is fraction/km;
    idle_cost_per_km is the per-km cost of empty guidance travel.
    """

    id: int
    loc: GeoPoint
    soc: float
    consumption_rate: float
    idle_cost_per_km: float
    status: EvStatus = EvStatus.IDLE

    def __post_init__(self) -> None:
        if not (0.0 <= self.soc <= 1.0):
            raise ValueError(f"EV {self.id}: soc {self.soc} outside [0, 1]")
        if self.consumption_rate <= 0.0:
            raise ValueError(f"EV {self.id}: consumption_rate must be positive")
        if self.idle_cost_per_km <= 0.0:
            raise ValueError(f"EV {self.id}: idle_cost_per_km must be positive")


@dataclass(frozen=True)
class RiderRequest:
    """Ride request: (id, origin, destination, request time, latest departure).

    Times are minutes; trip_km is the origin->destination distance under the
    system metric.
    """

    id: str
    origin: GeoPoint
    dest: GeoPoint
    req_time: float
    latest_departure: float
    trip_km: float

    def __post_init__(self) -> None:
        if self.latest_departure < self.req_time:
            raise ValueError(f"rider {self.id}: latest_departure before req_time")
        if self.trip_km < 0.0:
            raise ValueError(f"rider {self.id}: negative trip_km")


def make_rider(rid: str, origin: GeoPoint, dest: GeoPoint,
               req_time: float, latest_departure: float) -> RiderRequest:
    """Build a RiderRequest with trip_km derived from the system metric."""
    return RiderRequest(rid, origin, dest, req_time, latest_departure,
                        distance(origin, dest))


@dataclass(frozen=True)
class ChargingStation:
    id: int
    loc: GeoPoint
    num_chargers: int

    def __post_init__(self) -> None:
        if self.num_chargers < 1:
            raise ValueError(f"station {self.id}: num_chargers must be >= 1")


@dataclass(frozen=True)
class BatchingWindow:
    """Window t covering minutes [start, start + duration)."""

    index: int
    start: float
    duration: float

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("window duration must be positive")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def contains_time(self, minute: float) -> bool:
        return self.start <= minute < self.end


def distance(a: GeoPoint, b: GeoPoint) -> float:
    """Kilometres between two points, equirectangular projection.

    Planar Euclidean on (lat, lon) with longitude scaled by cos of the
    mid-latitude; exact enough over a metro-scale service area and a true
    metric there (symmetric, zero iff identical, triangle inequality).
    """
    mid = math.radians((a.lat + b.lat) / 2.0)
    dx = math.radians(b.lon - a.lon) * math.cos(mid)
    dy = math.radians(b.lat - a.lat)
    return EARTH_RADIUS_KM * math.hypot(dx, dy)


def soc_after_travel(ev: Ev, km: float) -> tuple[float, bool]:
    """SoC after driving km, clamped at 0 with an exhaustion flag.

    The flag signals an infeasible itinerary; solvers are expected to have
    filtered such moves out via the energy constraints, so a True here in
    simulation output is a diagnostic, not a normal outcome.
    """
    if km < 0.0:
        raise ValueError("negative travel distance")
    remaining = ev.soc - ev.consumption_rate * km
    if remaining < 0.0:
        return 0.0, True
    return remaining, False
