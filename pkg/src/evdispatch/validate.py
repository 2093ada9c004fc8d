"""Independent re-verification of guidance and matching plans.

These validators recompute every constraint from raw coordinates and
parameters; they never consult the eligibility sets or cached costs a
builder produced, so a corrupted plan cannot sneak past on stale data.
Each returns a list of human-readable violations (empty = valid).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .charging import stations_near
from .core import distance
from .guidance import GuidanceInstance
from .matching import SCALE, MatchInstance, cs_cost, rider_wait

OBJECTIVE_REL_TOL = 1e-6


def validate_guidance_plan(instance: GuidanceInstance,
                           pairs: Sequence[tuple[int, int]],
                           objective: float | None = None) -> list[str]:
    """Check a guidance assignment against the raw model constraints.

    pairs is the (ev_id, region_id) list of guided moves; objective, when
    given, is re-derived from scratch and compared at 1e-6 relative.
    """
    violations: list[str] = []
    p = instance.params
    ev_by_id = {e.id: e for e in instance.evs}
    region_by_id = {r.id: r for r in instance.regions}
    seen: set[int] = set()
    for ev_id, region_id in pairs:
        ev = ev_by_id.get(ev_id)
        region = region_by_id.get(region_id)
        if ev is None or region is None:
            violations.append(f"unknown ids in pair ({ev_id}, {region_id})")
            continue
        if ev_id in seen:
            violations.append(f"EV {ev_id} guided to more than one region")
        seen.add(ev_id)
        g = distance(ev.loc, region.poi)
        if 60.0 * g / p.gamma_kmh > p.delta_t_min:
            violations.append(
                f"EV {ev_id} cannot reach region {region_id} POI in the window")
        need = ev.consumption_rate * (g + region.avg_trip_km) + p.lam * ev.soc
        if need > ev.soc:
            violations.append(
                f"EV {ev_id} lacks SoC for region {region_id} plus reserve")
    if p.fleet_cap is not None and len(pairs) > p.fleet_cap:
        violations.append(f"{len(pairs)} EVs guided, cap is {p.fleet_cap}")
    if objective is not None and not violations:
        recomputed = _guidance_objective(instance, pairs)
        denom = max(abs(recomputed), 1e-12)
        if abs(recomputed - objective) / denom > OBJECTIVE_REL_TOL:
            violations.append(
                f"objective {objective} != recomputed {recomputed}")
    return violations


def _guidance_objective(instance: GuidanceInstance,
                        pairs: Sequence[tuple[int, int]]) -> float:
    p = instance.params
    ev_by_id = {e.id: e for e in instance.evs}
    region_by_id = {r.id: r for r in instance.regions}
    idle = sum(ev_by_id[j].idle_cost_per_km
               * distance(ev_by_id[j].loc, region_by_id[i].poi)
               for j, i in pairs)
    counts = {r.id: 0 for r in instance.regions}
    for _, i in pairs:
        counts[i] += 1
    penalty = 0.0
    for region in instance.regions:
        scen = instance.scenarios[region.id].astype(float)
        n = counts[region.id]
        penalty += (p.beta1 * float(np.maximum(0.0, n - scen).sum())
                    + p.beta2 * float(np.maximum(0.0, scen - n).sum())
                    ) / instance.n_scenarios
    return idle + penalty


def validate_match_plan(instance: MatchInstance,
                        matches: Sequence[tuple[int, str, int]],
                        objective: float | None = None) -> list[str]:
    """Check a matching against the raw model constraints.

    matches is the (ev_id, rider_id, station_id) list; objective, when
    given, is re-derived (including the unmatched-rider penalty) and
    compared at 1e-6 relative.
    """
    violations: list[str] = []
    p = instance.params
    ev_by_id = {e.id: e for e in instance.evs}
    rider_by_id = {r.id: r for r in instance.riders}
    seen_evs: set[int] = set()
    seen_riders: set[str] = set()
    for ev_id, rider_id, station_id in matches:
        ev = ev_by_id.get(ev_id)
        rider = rider_by_id.get(rider_id)
        if ev is None or rider is None:
            violations.append(f"unknown ids in match ({ev_id}, {rider_id})")
            continue
        if ev_id in seen_evs:
            violations.append(f"EV {ev_id} matched to more than one rider")
        if rider_id in seen_riders:
            violations.append(f"rider {rider_id} matched to more than one EV")
        seen_evs.add(ev_id)
        seen_riders.add(rider_id)
        candidates = stations_near(rider.dest, instance.stations, p.cs_radius_km)
        farthest = max(distance(rider.dest, s.loc) for s in candidates)
        if ev.consumption_rate * (rider.trip_km + farthest) > ev.soc:
            violations.append(
                f"EV {ev_id} lacks SoC for rider {rider_id}'s trip plus CS leg")
        arrival = (p.window_start + p.delta_t_min
                   + 60.0 * distance(ev.loc, rider.origin) / p.gamma_kmh)
        if arrival > rider.latest_departure:
            violations.append(
                f"EV {ev_id} reaches rider {rider_id} after latest departure")
        if station_id not in {s.id for s in candidates}:
            violations.append(
                f"station {station_id} not a candidate for rider {rider_id}")
    if objective is not None and not violations:
        recomputed = _match_objective(instance, matches)
        denom = max(abs(recomputed), 1e-12)
        if abs(recomputed - objective) / denom > OBJECTIVE_REL_TOL:
            violations.append(
                f"objective {objective} != recomputed {recomputed}")
    return violations


def _match_objective(instance: MatchInstance,
                     matches: Sequence[tuple[int, str, int]]) -> float:
    p = instance.params
    ev_by_id = {e.id: e for e in instance.evs}
    rider_by_id = {r.id: r for r in instance.riders}
    total = 0.0
    for ev_id, rider_id, _ in matches:
        ev, rider = ev_by_id[ev_id], rider_by_id[rider_id]
        w1, _ = cs_cost(ev, rider, instance.stations, instance.station_wait, p)
        w2 = rider_wait(ev, rider, p)
        total += p.theta1 * w1 + p.theta2 * w2
    total += (instance.h_int / SCALE) * (len(instance.riders) - len(matches))
    return total
