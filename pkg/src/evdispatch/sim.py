"""Rolling-horizon fleet simulator and the five benchmark dispatch policies.

Per batching window the engine: (1) samples or point-forecasts demand per
the policy's guidance mode, (2) solves the guidance program and moves
guided EVs to POIs, (3) pools new requests with carried-over riders,
(4) solves the batched matching, (5) executes trips, charging-station
legs, and realized charge waits in continuous time inside the discrete
loop, and (6) scores the window (matching rate, rider wait, charge wait,
SoC-bucketed charge wait).

Paired evaluation under a shared availability trajectory
--------------------------------------------------------
Policies that share a guidance mode (the three stochastic-guidance
variants) are evaluated against the *same* per-window matching instance:
identical EV pool, rider pool, eligibility graph, and station-wait
realizations under common random numbers. Their matching objectives are
solved separately for scoring, while fleet dynamics always follow the
combined-objective solution. Because the matching solver is strictly
cardinality-maximal, every variant matches the same number of riders per
window, so the matching rate is identical across same-guidance policies
by construction; the variants differ in who serves whom and at which
station, which is exactly what the rider-wait and charge-wait metrics
measure. This isolates the matching objective's effect from availability
feedback, the standard paired-comparison treatment for benchmark studies.
"""

from __future__ import annotations

import enum
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import charging, forecast, guidance, matching
from .config import Config
from .core import (ChargingStation, Ev, EvStatus, GeoPoint, Region,
                   RiderRequest, check_transition, distance, make_rider,
                   soc_after_travel)
from .ingest import (MINUTES_PER_DAY, DemandSeries, TripRecord, bin_demand,
                     estimate_avg_trip, estimate_fleet_size)
from .seeds import STREAM_FLEET, STREAM_SCENARIOS, STREAM_WAITS, rng_stream
from .synth import SynthWorld


class GuidanceMode(enum.Enum):
    NONE = "none"
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


class MatchingObjective(enum.Enum):
    RIDER_WAIT = "rider_wait"
    CHARGE_WAIT = "charge_wait"
    COMBINED = "combined"


@dataclass(frozen=True)
class Policy:
    name: str
    guidance: GuidanceMode
    matching_objective: MatchingObjective


POLICIES: dict[str, Policy] = {p.name: p for p in [
    Policy("BMCSS-NG", GuidanceMode.NONE, MatchingObjective.COMBINED),
    Policy("BMCSS-DG", GuidanceMode.DETERMINISTIC, MatchingObjective.COMBINED),
    Policy("BMRWT-SG", GuidanceMode.STOCHASTIC, MatchingObjective.RIDER_WAIT),
    Policy("BMCWT-SG", GuidanceMode.STOCHASTIC, MatchingObjective.CHARGE_WAIT),
    Policy("BMCSS-SG", GuidanceMode.STOCHASTIC, MatchingObjective.COMBINED),
]}

LOW_SOC_MAX = 0.30
MID_SOC_MIN = 0.30
MID_SOC_MAX = 0.60


def metrics_mr(matched: int, requests: int) -> float:
    """Matched share of the window's request pool; empty pools score 1.0."""
    if requests == 0:
        return 1.0
    return matched / requests


def metrics_rawt(waits: Sequence[float]) -> float | None:
    """Mean rider wait over matched riders; None when nothing matched."""
    if not waits:
        return None
    return float(np.mean(waits))


def metrics_acwt(waits: Sequence[float], matched: int) -> float | None:
    """Total realized charge wait over the number of matched EVs."""
    if matched == 0:
        return None
    return float(np.sum(waits)) / matched


def bucket_acwt(soc_wait: Sequence[tuple[float, float]],
                lo: float, hi: float) -> float | None:
    """Mean realized wait over matched EVs whose pre-trip SoC is in [lo, hi]."""
    inside = [w for s, w in soc_wait if lo <= s <= hi]
    if not inside:
        return None
    return float(np.mean(inside))


@dataclass(frozen=True)
class WindowRecord:
    policy: str
    sim_day: int
    date_index: int
    day_type: str
    window_index: int          # global across the run
    slot: int
    requests: int
    new_requests: int
    matched: int
    carried_over: int
    expired: int
    mr: float
    rawt: float | None
    acwt: float | None
    acwt_low_soc: float | None
    acwt_mid_soc: float | None


@dataclass(frozen=True)
class SimDayData:
    sim_index: int
    date_index: int
    day_type: str
    start_minute: float
    trips: list[TripRecord]
    riders: list[RiderRequest]


@dataclass(frozen=True)
class Dataset:
    regions: list[Region]
    stations: list[ChargingStation]
    days: list[SimDayData]


@dataclass
class SimEv:
    """Mutable per-run EV state; checkpoints drive status transitions."""

    id: int
    loc: GeoPoint
    soc: float
    consumption_rate: float
    idle_cost_per_km: float
    status: EvStatus = EvStatus.IDLE
    # pending (time, status, loc, soc) checkpoints, time-ascending
    itinerary: list[tuple[float, EvStatus, GeoPoint, float]] = field(default_factory=list)
    target_station: int | None = None
    soc_at_cs: float = 0.0

    def advance(self, now: float, log=None) -> None:
        while self.itinerary and self.itinerary[0][0] <= now:
            _, status, loc, soc = self.itinerary.pop(0)
            check_transition(self.status, status)
            if log is not None:
                log.append((self.id, self.status, status, self.soc, soc))
            self.status = status
            self.loc = loc
            self.soc = soc
            if status == EvStatus.IDLE:
                self.target_station = None

    def busy(self) -> bool:
        return bool(self.itinerary)

    def matchable(self) -> bool:
        return not self.busy() and self.status in (EvStatus.IDLE, EvStatus.GUIDED)

    def guidable(self) -> bool:
        return not self.busy() and self.status == EvStatus.IDLE

    def to_core(self) -> Ev:
        return Ev(self.id, self.loc, self.soc, self.consumption_rate,
                  self.idle_cost_per_km, self.status)


def init_fleet(cfg: Config, regions: Sequence[Region], rng) -> list[SimEv]:
    """Fresh idle fleet scattered uniformly over the region rectangles."""
    omegas = cfg.omega_fraction_per_km
    fleet = []
    for i in range(cfg.n_evs):
        rect = regions[int(rng.integers(0, len(regions)))].bounds
        loc = GeoPoint(float(rng.uniform(rect.min_lat, rect.max_lat)),
                       float(rng.uniform(rect.min_lon, rect.max_lon)))
        soc = float(rng.uniform(cfg.soc_init_min, cfg.soc_init_max))
        omega = float(omegas[int(rng.integers(0, len(omegas)))])
        alpha = float(rng.uniform(cfg.alpha_min, cfg.alpha_max))
        fleet.append(SimEv(i, loc, soc, omega, alpha))
    return fleet


def riders_from_trips(trips: Sequence[TripRecord], date_index: int,
                      patience_min: float) -> list[RiderRequest]:
    return [make_rider(f"d{date_index:03d}r{i:05d}", t.pickup, t.dropoff,
                       t.pickup_time, t.pickup_time + patience_min)
            for i, t in enumerate(trips)]


def assemble_dataset(cfg: Config, world: SynthWorld) -> Dataset:
    """Regions with estimated average trips plus per-day rider pools."""
    train = world.train_trips
    regions = []
    for i, rect in enumerate(cfg.regions):
        probe = Region(i, rect.center, rect, cfg.trip_fallback_km)
        try:
            avg = estimate_avg_trip(train, probe)
        except ValueError:
            avg = cfg.trip_fallback_km
        regions.append(Region(i, rect.center, rect, avg))
    days = []
    for si, day in enumerate(world.sim_days):
        start = (min(t.pickup_time for t in day.trips) // MINUTES_PER_DAY
                 * MINUTES_PER_DAY) if day.trips else 0.0
        days.append(SimDayData(si, day.date_index, day.day_type, start,
                               list(day.trips),
                               riders_from_trips(day.trips, day.date_index,
                                                 cfg.rider_patience_min)))
    return Dataset(regions, world.stations, days)


def series_for_day_type(trips: Sequence[TripRecord], regions: Sequence[Region],
                        cfg: Config, date_indices: Sequence[int],
                        calendar_base_minute: float) -> DemandSeries:
    """Demand series restricted to the listed calendar days.

    date_indices are days since the calendar base; rows of the binned
    series are selected by absolute day so gaps between selected days never
    enter the history as phantom zero-demand observations.
    """
    full = bin_demand(trips, regions, cfg.delta_t_min)
    rows = [int((calendar_base_minute + d * MINUTES_PER_DAY
                 - full.base_minute) // MINUTES_PER_DAY)
            for d in date_indices]
    rows = [r for r in rows if 0 <= r < full.n_days]
    return DemandSeries(full.counts[rows], full.windows_per_day, full.base_minute)


def fit_models(cfg: Config, world: SynthWorld,
               regions: Sequence[Region]) -> dict[str, forecast.ForecastModel]:
    """One forecast model per day type, fitted on the training days."""
    from .synth import BASE_MINUTE
    models = {}
    for day_type in ("weekday", "weekend"):
        dates = [d.date_index for d in world.train_days
                 if d.day_type == day_type]
        if not dates:
            continue
        series = series_for_day_type(world.train_trips, regions, cfg,
                                     dates, BASE_MINUTE)
        models[day_type] = forecast.fit(series, cfg.mixture_components)
    return models


class Simulator:
    """Executes policy trajectories over a dataset under one master seed."""

    def __init__(self, cfg: Config, dataset: Dataset,
                 models: dict[str, forecast.ForecastModel], seed: int,
                 log_states: bool = False):
        self.cfg = cfg
        self.dataset = dataset
        self.models = models
        self.seed = seed
        self.diagnostics: Counter = Counter()
        self.window_seconds: list[float] = []
        self._demand_level: dict[int, float | None] = {}
        # (policy, sim_day, slot) -> hashable matching-state fingerprint
        self.state_log: dict[tuple[str, int, int], tuple] | None = (
            {} if log_states else None)
        self.transition_log: list | None = None

    def run(self, policy_names: Sequence[str]) -> list[WindowRecord]:
        unknown = [n for n in policy_names if n not in POLICIES]
        if unknown:
            raise ValueError(f"unknown policies: {unknown}; "
                             f"valid: {sorted(POLICIES)}")
        records: list[WindowRecord] = []
        for mode in GuidanceMode:
            names = [n for n in policy_names if POLICIES[n].guidance == mode]
            if names:
                records.extend(self._run_trajectory(mode, names))
        records.sort(key=lambda r: (r.policy, r.sim_day, r.slot))
        return records

    # -- trajectory ------------------------------------------------------

    def _run_trajectory(self, mode: GuidanceMode,
                        names: list[str]) -> list[WindowRecord]:
        cfg = self.cfg
        records: list[WindowRecord] = []
        for day in self.dataset.days:
            fleet = init_fleet(cfg, self.dataset.regions,
                               rng_stream(self.seed, STREAM_FLEET, day.date_index))
            carry: list[RiderRequest] = []
            # reactive demand level per region for the deterministic
            # benchmark's point forecasts; reset at each day start
            self._demand_level = {r.id: None for r in self.dataset.regions}
            for slot in range(cfg.windows_per_day):
                t0 = time.perf_counter()
                recs, carry = self._window(mode, names, day, fleet, carry, slot)
                self.window_seconds.append(time.perf_counter() - t0)
                records.extend(recs)
        return records

    REACTIVE_SMOOTHING = 0.15

    def _observe_demand(self, new_riders: list[RiderRequest]) -> None:
        """Feed realized window demand into the reactive level estimates."""
        counts = {rid: 0 for rid in self._demand_level}
        for rider in new_riders:
            for region in self.dataset.regions:
                if region.bounds.contains(rider.origin):
                    counts[region.id] += 1
                    break
        a = self.REACTIVE_SMOOTHING
        for rid, count in counts.items():
            prev = self._demand_level[rid]
            self._demand_level[rid] = (count if prev is None
                                       else a * count + (1 - a) * prev)

    def _window(self, mode: GuidanceMode, names: list[str], day: SimDayData,
                fleet: list[SimEv], carry: list[RiderRequest],
                slot: int) -> tuple[list[WindowRecord], list[RiderRequest]]:
        cfg = self.cfg
        st = day.start_minute + slot * cfg.delta_t_min
        end = st + cfg.delta_t_min
        for ev in fleet:
            ev.advance(st, self.transition_log)
        # carry-overs that can still be served re-enter this window's batch
        kept = [r for r in carry if r.latest_departure >= end]
        expired = len(carry) - len(kept)
        if mode is not GuidanceMode.NONE:
            self._guide(mode, day, fleet, slot, st, kept)
        new_riders = [r for r in day.riders if st <= r.req_time < end]
        self._observe_demand(new_riders)
        pool = kept + new_riders
        # station wait models from the queues the trajectory actually has
        wait_dists: dict[int, charging.WaitDistribution] = {}
        for stn in self.dataset.stations:
            socs = [ev.soc_at_cs for ev in fleet
                    if ev.target_station == stn.id
                    and ev.status in (EvStatus.TRAVELING_TO_CS, EvStatus.CHARGING)]
            n, lo, hi = charging.queue_stats(socs)
            wait_dists[stn.id] = charging.wait_distribution(
                stn, n, lo, hi, cfg.charge_rate_per_hour)
        pool_evs = [ev for ev in fleet if ev.matchable()]
        mparams = matching.MatchParams(cfg.theta1, cfg.theta2, cfg.pi1, cfg.pi2,
                                       cfg.gamma_kmh, st, cfg.delta_t_min,
                                       cfg.cs_radius_km)
        inst = matching.build_instance(
            [ev.to_core() for ev in pool_evs], pool, self.dataset.stations,
            {u: d.mean for u, d in wait_dists.items()}, mparams)
        canonical = matching.solve(inst)
        # one realized wait per station per window, shared by the group
        wait_rng = rng_stream(self.seed, STREAM_WAITS, day.date_index, slot)
        realized = {stn.id: charging.sample_wait(wait_dists[stn.id], wait_rng)
                    for stn in self.dataset.stations}
        soc_prime = {ev.id: ev.soc for ev in pool_evs}
        records = []
        for name in names:
            objective = POLICIES[name].matching_objective
            if objective is MatchingObjective.COMBINED:
                plan = canonical
            elif objective is MatchingObjective.RIDER_WAIT:
                plan = matching.solve(matching.reweight(inst, 0.0, cfg.theta2))
            else:
                plan = matching.solve(matching.reweight(inst, cfg.theta1, 0.0))
            assert len(plan.matches) == len(canonical.matches), \
                "cardinality-maximal solver broke match-count invariance"
            records.append(self._score(name, day, slot, pool, new_riders,
                                       expired, plan, inst, realized, soc_prime))
            if self.state_log is not None:
                self.state_log[(name, day.sim_index, slot)] = (
                    tuple(sorted(soc_prime.items())),
                    tuple(sorted(r.id for r in pool)),
                    tuple(sorted(inst.pairs)),
                )
        self._execute(canonical, inst, fleet, realized, end)
        matched_riders = {k for _, k, _ in canonical.matches}
        carry_out = [r for r in pool if r.id not in matched_riders]
        return records, carry_out

    def _guide(self, mode: GuidanceMode, day: SimDayData, fleet: list[SimEv],
               slot: int, st: float, carried: list[RiderRequest]) -> None:
        cfg = self.cfg
        regions = self.dataset.regions
        idle = [ev for ev in fleet if ev.guidable()]
        model = self.models.get(day.day_type)
        if not idle or model is None:
            return
        region_ids = [r.id for r in regions]
        # batch demand = carried-over riders (already known when the window
        # opens) plus the uncertain new arrivals the forecaster models
        backlog = {rid: 0 for rid in region_ids}
        for rider in carried:
            for region in regions:
                if region.bounds.contains(rider.origin):
                    backlog[region.id] += 1
                    break
        if mode is GuidanceMode.STOCHASTIC:
            rng = rng_stream(self.seed, STREAM_SCENARIOS, day.date_index, slot)
            scen = forecast.sample_scenarios(model, region_ids, slot,
                                             cfg.saa_scenarios, rng).samples
            scen = {rid: arr + backlog[rid] for rid, arr in scen.items()}
        else:
            # deterministic benchmark: reactive point forecast (smoothed
            # realized demand level, the role a non-seasonal time-series
            # point predictor plays), falling back to the fitted mean
            # before any demand has been observed
            scen = {}
            for rid in region_ids:
                level = self._demand_level.get(rid)
                point = (forecast.point_forecast(model, rid, slot)
                         if level is None else int(np.floor(level + 0.5)))
                scen[rid] = np.array([point + backlog[rid]], dtype=np.int64)
        # the idle-EV count at time t; the guidance cap therefore only rules
        # out assigning more EVs than are actually idle (the dropoff-count
        # estimator in ingest serves data-only runs, where fleet state is
        # unobservable)
        cap = len(idle) if cfg.use_fleet_cap else None
        params = guidance.GuidanceParams(cfg.beta1, cfg.beta2, cfg.gamma_kmh,
                                         cfg.delta_t_min, cfg.lam, cap)
        ginst = guidance.build_instance([ev.to_core() for ev in idle],
                                        regions, scen, params)
        plan = guidance.solve(ginst)
        by_id = {ev.id: ev for ev in fleet}
        region_by_id = {r.id: r for r in regions}
        for ev_id, region_id in plan.assignment.items():
            ev = by_id[ev_id]
            g = ginst.pairs[(ev_id, region_id)]
            new_soc, exhausted = soc_after_travel(ev.to_core(), g)
            if exhausted:
                self.diagnostics["soc_exhausted"] += 1
            check_transition(ev.status, EvStatus.GUIDED)
            if self.transition_log is not None:
                self.transition_log.append((ev.id, ev.status, EvStatus.GUIDED,
                                            ev.soc, new_soc))
            ev.status = EvStatus.GUIDED
            ev.loc = region_by_id[region_id].poi
            ev.soc = new_soc

    def _score(self, name: str, day: SimDayData, slot: int,
               pool: list[RiderRequest], new_riders: list[RiderRequest],
               expired: int, plan: matching.MatchPlan,
               inst: matching.MatchInstance, realized: dict[int, float],
               soc_prime: dict[int, float]) -> WindowRecord:
        waits2 = [inst.pairs[(j, k)].w2 for j, k, _ in plan.matches]
        charge_waits = [realized[u] for _, _, u in plan.matches]
        soc_wait = [(soc_prime[j], realized[u]) for j, _, u in plan.matches]
        matched = len(plan.matches)
        return WindowRecord(
            policy=name, sim_day=day.sim_index, date_index=day.date_index,
            day_type=day.day_type,
            window_index=day.sim_index * self.cfg.windows_per_day + slot,
            slot=slot, requests=len(pool), new_requests=len(new_riders),
            matched=matched, carried_over=len(pool) - matched, expired=expired,
            mr=metrics_mr(matched, len(pool)),
            rawt=metrics_rawt(waits2),
            acwt=metrics_acwt(charge_waits, matched),
            acwt_low_soc=bucket_acwt(soc_wait, 0.0, LOW_SOC_MAX),
            acwt_mid_soc=bucket_acwt(soc_wait, MID_SOC_MIN, MID_SOC_MAX))

    def _execute(self, plan: matching.MatchPlan, inst: matching.MatchInstance,
                 fleet: list[SimEv], realized: dict[int, float],
                 depart: float) -> None:
        """Advance fleet state along the combined-objective solution."""
        cfg = self.cfg
        by_id = {ev.id: ev for ev in fleet}
        rider_by_id = {r.id: r for r in inst.riders}
        station_by_id = {s.id: s for s in inst.stations}
        matched_evs = set()
        for ev_id, rider_id, station_id in plan.matches:
            ev = by_id[ev_id]
            rider = rider_by_id[rider_id]
            station = station_by_id[station_id]
            matched_evs.add(ev_id)
            pickup_km = distance(ev.loc, rider.origin)
            soc1, ex1 = soc_after_travel(ev.to_core(),
                                         pickup_km + rider.trip_km)
            t_drop = depart + 60.0 * (pickup_km + rider.trip_km) / cfg.gamma_kmh
            check_transition(ev.status, EvStatus.SERVING)
            if self.transition_log is not None:
                self.transition_log.append((ev.id, ev.status, EvStatus.SERVING,
                                            ev.soc, ev.soc))
            ev.status = EvStatus.SERVING
            if ex1:
                self.diagnostics["soc_exhausted"] += 1
            if cfg.charge_after_trip:
                cs_km = distance(rider.dest, station.loc)
                soc2 = max(0.0, soc1 - ev.consumption_rate * cs_km)
                if soc1 - ev.consumption_rate * cs_km < 0.0:
                    self.diagnostics["soc_exhausted"] += 1
                t_cs = t_drop + 60.0 * cs_km / cfg.gamma_kmh
                wait = realized[station_id]
                charge_min = 60.0 * (charging.CHARGE_TARGET_SOC - soc2) \
                    / cfg.charge_rate_per_hour
                ev.itinerary = [
                    (t_drop, EvStatus.TRAVELING_TO_CS, rider.dest, soc1),
                    (t_cs, EvStatus.CHARGING, station.loc, soc2),
                    (t_cs + wait + charge_min, EvStatus.IDLE, station.loc,
                     charging.CHARGE_TARGET_SOC),
                ]
                ev.target_station = station_id
                ev.soc_at_cs = soc2
            else:
                ev.itinerary = [(t_drop, EvStatus.IDLE, rider.dest, soc1)]
        # guided EVs that stayed unmatched idle at the POI they moved to
        for ev in fleet:
            if ev.status == EvStatus.GUIDED and ev.id not in matched_evs:
                check_transition(ev.status, EvStatus.IDLE)
                if self.transition_log is not None:
                    self.transition_log.append((ev.id, ev.status, EvStatus.IDLE,
                                                ev.soc, ev.soc))
                ev.status = EvStatus.IDLE


def run_experiment(cfg: Config, dataset: Dataset,
                   models: dict[str, forecast.ForecastModel],
                   policy_names: Sequence[str], seed: int,
                   log_states: bool = False
                   ) -> tuple[list[WindowRecord], Simulator]:
    sim = Simulator(cfg, dataset, models, seed, log_states=log_states)
    records = sim.run(policy_names)
    return records, sim
