"""Charging-station candidate sets and the stochastic charge-wait model.

Per-station charging time is uniform on [a, b] minutes with
a = 60*(0.8 - soc_max)/CR and b = 60*(0.8 - soc_min)/CR, where CR is the
charge rate in battery-fraction per hour and soc_min/soc_max are taken over
the EVs queued at the station. An EV arriving behind m = floor(queued/chargers)
batches waits the sum of m such charging times, so by the CLT the wait is
treated as Gaussian with mean m*(a+b)/2 and variance m^2*(b-a)^2/12.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import ChargingStation, GeoPoint, distance

# Charging always terminates at this battery fraction; the a/b formulas
# above assume it.
CHARGE_TARGET_SOC = 0.8

# Counts clamp events where a queued SoC exceeded the charge target, which
# would drive the uniform bound negative.
DIAGNOSTICS: Counter = Counter()


class StationConfigError(Exception):
    """Raised when the global station list is empty."""


@dataclass(frozen=True)
class WaitDistribution:
    """Gaussian charge-wait model at one station for one window.

    mean and variance are in minutes and minutes^2; m is the number of
    whole charger batches ahead of a new arrival; a <= b are the uniform
    charging-time bounds in minutes. m = 0 means no wait at all.
    """

    mean: float
    variance: float
    m: int
    a: float
    b: float

    def __post_init__(self) -> None:
        if self.a > self.b or self.m < 0:
            raise ValueError("invalid wait distribution parameters")
        if self.m == 0 and (self.mean != 0.0 or self.variance != 0.0):
            raise ValueError("m = 0 requires a zero wait")


ZERO_WAIT = WaitDistribution(0.0, 0.0, 0, 0.0, 0.0)


def stations_near(dest: GeoPoint, stations: Sequence[ChargingStation],
                  radius_km: float = 3.0) -> list[ChargingStation]:
    """Stations within radius_km of dest (closed ball), sorted by id.

    A destination with no station in range falls back to the single nearest
    station so that a charging trip always exists; an empty global station
    list is a configuration error.
    """
    if not stations:
        raise StationConfigError("no charging stations configured")
    if radius_km <= 0.0:
        raise ValueError("radius_km must be positive")
    inside = [s for s in stations if distance(dest, s.loc) <= radius_km]
    if not inside:
        nearest = min(stations, key=lambda s: (distance(dest, s.loc), s.id))
        return [nearest]
    return sorted(inside, key=lambda s: s.id)


def wait_distribution(station: ChargingStation, idle_count: int,
                      soc_min: float, soc_max: float,
                      charge_rate_per_hour: float) -> WaitDistribution:
    """Wait model for one station given its current queue.

    idle_count is the number of EVs waiting to charge there; soc_min/soc_max
    bound the queued SoCs. Bounds above the charge target clamp to a zero
    charging time and bump DIAGNOSTICS["soc_above_target"].
    """
    if idle_count < 0:
        raise ValueError("idle_count must be >= 0")
    if charge_rate_per_hour <= 0.0:
        raise ValueError("charge rate must be positive")
    if soc_min > soc_max:
        raise ValueError("soc_min > soc_max")
    m = idle_count // station.num_chargers
    if m == 0:
        return ZERO_WAIT
    a = 60.0 * (CHARGE_TARGET_SOC - soc_max) / charge_rate_per_hour
    b = 60.0 * (CHARGE_TARGET_SOC - soc_min) / charge_rate_per_hour
    if a < 0.0:
        DIAGNOSTICS["soc_above_target"] += 1
        a = 0.0
    if b < 0.0:
        DIAGNOSTICS["soc_above_target"] += 1
        b = 0.0
    mean = m * (a + b) / 2.0
    variance = m * m * (b - a) ** 2 / 12.0
    return WaitDistribution(mean, variance, m, a, b)


def expected_wait(dist: WaitDistribution) -> float:
    return dist.mean


def sample_wait(dist: WaitDistribution, rng) -> float:
    """One realized wait in minutes: Gaussian draw truncated at 0.

    rng may be a seed or a numpy Generator; the draw is deterministic for a
    given seed. A zero-variance distribution returns its mean exactly.
    """
    gen = np.random.default_rng(rng)
    if dist.m == 0:
        return 0.0
    if dist.variance == 0.0:
        return dist.mean
    return max(0.0, float(gen.normal(dist.mean, dist.variance ** 0.5)))


def queue_stats(socs: Iterable[float]) -> tuple[int, float, float]:
    """(count, soc_min, soc_max) of a station queue; empty queues report
    zero-extent bounds at the charge target (irrelevant because m = 0)."""
    vals = list(socs)
    if not vals:
        return 0, CHARGE_TARGET_SOC, CHARGE_TARGET_SOC
    return len(vals), min(vals), max(vals)
