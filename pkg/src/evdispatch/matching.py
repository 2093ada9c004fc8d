"""Batched rider-EV matching with per-match charging-station selection.

Each eligible (EV j, rider k) pair carries two costs:

    w1 = min over candidate stations u near the rider's destination of
         pi1 * dist(dest, u) + pi2 * E[wait_u] / (soc_j - omega_j * trip_k)
    w2 = ST + dT - req_k + dist(ev, origin) / gamma     (rider wait, min)

and the batch objective is sum (theta1*w1 + theta2*w2) y_jk plus a large
penalty H per unmatched rider. H is sized per instance so that matching one
more rider always beats any cost saving, making the solver lexicographic:
maximize match count, then minimize weighted cost.

Pair eligibility: the EV must be able to finish the trip and still reach
the farthest candidate station (omega*(trip + max station dist) <= soc),
and it must reach the pickup by the rider's latest departure.

The solve pads the cost matrix square with dummy rows/columns (EV unmatched
free, rider unmatched H) and runs an exact assignment solver on integer
micro-unit costs; a brute-force enumerator serves as the independent oracle.

cs_cost / rider_wait / eligibility are the scalar reference semantics;
build_instance computes the same quantities vectorized for the simulator's
per-window hot path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .charging import stations_near
from .core import ChargingStation, Ev, GeoPoint, RiderRequest, distance

SCALE = 10 ** 6
# Sums of |D|+|R| scaled costs must stay exactly representable in float64.
MAX_SAFE_COST = float(1 << 52)

DEG = np.pi / 180.0
EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class MatchParams:
    theta1: float
    theta2: float
    pi1: float
    pi2: float
    gamma_kmh: float
    window_start: float    # ST, minutes
    delta_t_min: float
    cs_radius_km: float = 3.0

    def __post_init__(self) -> None:
        if self.theta1 < 0.0 or self.theta2 < 0.0:
            raise ValueError("objective weights must be non-negative")
        if self.gamma_kmh <= 0.0 or self.delta_t_min <= 0.0:
            raise ValueError("speed and window duration must be positive")


@dataclass(frozen=True)
class PairCost:
    w1: float          # charging-selection cost, currency
    w2: float          # rider wait, minutes
    chosen_cs: int
    cost_int: int      # round(theta1*w1 + theta2*w2, micro units)


@dataclass(frozen=True)
class MatchInstance:
    evs: list[Ev]                        # soc holds SoC' (post-guidance)
    riders: list[RiderRequest]
    stations: list[ChargingStation]
    station_wait: dict[int, float]       # expected wait minutes per station
    params: MatchParams
    pairs: dict[tuple[int, str], PairCost]
    h_int: int


@dataclass(frozen=True)
class MatchPlan:
    matches: list[tuple[int, str, int]]  # (ev_id, rider_id, station_id)
    objective: float                      # includes the unmatched penalty term
    objective_int: int
    matched_cost: float                   # weighted pair-cost part only
    unmatched_riders: list[str]
    unmatched_evs: list[int]


def cs_cost(ev: Ev, rider: RiderRequest, stations: Sequence[ChargingStation],
            station_wait: dict[int, float],
            params: MatchParams) -> tuple[float, int]:
    """(w1, chosen station id): cheapest station near the rider's destination.

    The wait term divides by the EV's post-trip SoC margin so low-battery
    EVs price queue time more heavily. Ties pick the lower station id.
    """
    reserve = ev.soc - ev.consumption_rate * rider.trip_km
    if reserve <= 0.0:
        raise ValueError("pair must be filtered out before costing: no SoC margin")
    best: tuple[float, int] | None = None
    for station in stations_near(rider.dest, stations, params.cs_radius_km):
        cost = (params.pi1 * distance(rider.dest, station.loc)
                + params.pi2 * station_wait[station.id] / reserve)
        if best is None or cost < best[0]:
            best = (cost, station.id)
    assert best is not None
    return best


def rider_wait(ev: Ev, rider: RiderRequest, params: MatchParams) -> float:
    """Minutes from request to pickup when matched in this window."""
    if rider.req_time > params.window_start + params.delta_t_min:
        raise ValueError(f"rider {rider.id} requested after the batching window")
    travel_min = 60.0 * distance(ev.loc, rider.origin) / params.gamma_kmh
    return (params.window_start + params.delta_t_min - rider.req_time
            + travel_min)


def eligibility(ev: Ev, rider: RiderRequest,
                stations: Sequence[ChargingStation],
                params: MatchParams) -> bool:
    """Energy (trip + farthest candidate CS) and latest-departure tests."""
    candidates = stations_near(rider.dest, stations, params.cs_radius_km)
    farthest = max(distance(rider.dest, s.loc) for s in candidates)
    if ev.consumption_rate * (rider.trip_km + farthest) > ev.soc:
        return False
    if ev.soc - ev.consumption_rate * rider.trip_km <= 0.0:
        return False
    pickup_arrival = (params.window_start + params.delta_t_min
                      + 60.0 * distance(ev.loc, rider.origin) / params.gamma_kmh)
    return pickup_arrival <= rider.latest_departure


def _dist_matrix(lat_a: np.ndarray, lon_a: np.ndarray,
                 lat_b: np.ndarray, lon_b: np.ndarray) -> np.ndarray:
    """Pairwise equirectangular km, rows over a, columns over b."""
    mid = DEG * (lat_a[:, None] + lat_b[None, :]) / 2.0
    dx = DEG * (lon_b[None, :] - lon_a[:, None]) * np.cos(mid)
    dy = DEG * (lat_b[None, :] - lat_a[:, None])
    return EARTH_RADIUS_KM * np.hypot(dx, dy)


def build_instance(evs: Sequence[Ev], riders: Sequence[RiderRequest],
                   stations: Sequence[ChargingStation],
                   station_wait: dict[int, float],
                   params: MatchParams) -> MatchInstance:
    """Resolve pair eligibility and costs (vectorized), size H, scale to ints."""
    evs = sorted(evs, key=lambda e: e.id)
    riders = sorted(riders, key=lambda r: r.id)
    stations = sorted(stations, key=lambda s: s.id)
    if not stations:
        raise ValueError("matching requires at least one charging station")
    for rider in riders:
        if rider.req_time > params.window_start + params.delta_t_min:
            raise ValueError(f"rider {rider.id} requested after the batching window")
    pairs: dict[tuple[int, str], PairCost] = {}
    if evs and riders:
        ev_lat = np.array([e.loc.lat for e in evs])
        ev_lon = np.array([e.loc.lon for e in evs])
        soc = np.array([e.soc for e in evs])
        omega = np.array([e.consumption_rate for e in evs])
        o_lat = np.array([r.origin.lat for r in riders])
        o_lon = np.array([r.origin.lon for r in riders])
        d_lat = np.array([r.dest.lat for r in riders])
        d_lon = np.array([r.dest.lon for r in riders])
        req = np.array([r.req_time for r in riders])
        ldt = np.array([r.latest_departure for r in riders])
        trip = np.array([r.trip_km for r in riders])
        s_lat = np.array([s.loc.lat for s in stations])
        s_lon = np.array([s.loc.lon for s in stations])
        wait = np.array([station_wait[s.id] for s in stations])

        dest_to_cs = _dist_matrix(d_lat, d_lon, s_lat, s_lon)   # (R, U)
        in_range = dest_to_cs <= params.cs_radius_km
        # fallback: destinations with no station in range use the nearest one
        empty = ~in_range.any(axis=1)
        if empty.any():
            nearest = np.argmin(dest_to_cs[empty], axis=1)
            in_range[np.flatnonzero(empty), nearest] = True
        far = np.where(in_range, dest_to_cs, -np.inf).max(axis=1)  # (R,)

        pickup = _dist_matrix(ev_lat, ev_lon, o_lat, o_lon)      # (D, R)
        end = params.window_start + params.delta_t_min
        travel_min = 60.0 * pickup / params.gamma_kmh
        reserve = soc[:, None] - omega[:, None] * trip[None, :]  # (D, R)
        eligible = ((omega[:, None] * (trip[None, :] + far[None, :]) <= soc[:, None])
                    & (reserve > 0.0)
                    & (end + travel_min <= ldt[None, :]))
        w2 = end - req[None, :] + travel_min
        for ki, rider in enumerate(riders):
            cand = np.flatnonzero(in_range[ki])
            col = np.flatnonzero(eligible[:, ki])
            if len(col) == 0:
                continue
            # (eligible EVs, candidate stations)
            w1_grid = (params.pi1 * dest_to_cs[ki, cand][None, :]
                       + params.pi2 * wait[cand][None, :]
                       / reserve[col, ki][:, None])
            best = np.argmin(w1_grid, axis=1)
            w1_col = w1_grid[np.arange(len(col)), best]
            cost_col = np.round(
                (params.theta1 * w1_col + params.theta2 * w2[col, ki]) * SCALE)
            for row, ji in enumerate(col):
                pairs[(evs[ji].id, rider.id)] = PairCost(
                    float(w1_col[row]), float(w2[ji, ki]),
                    stations[cand[best[row]]].id, int(cost_col[row]))
    max_cost_int = max((pc.cost_int for pc in pairs.values()), default=0)
    h_int = max_cost_int * min(len(evs), len(riders)) + 1 if riders else 1
    if h_int * max(len(riders), 1) + max_cost_int * min(len(evs), len(riders)) \
            > MAX_SAFE_COST:
        raise ValueError("scaled costs too large for exact assignment arithmetic")
    return MatchInstance(list(evs), list(riders), list(stations),
                         dict(station_wait), params, pairs, h_int)


def reweight(instance: MatchInstance, theta1: float,
             theta2: float) -> MatchInstance:
    """Same pairs and eligibility, new objective weights and H.

    Benchmark variants that drop one objective term share the eligibility
    graph with the combined model; only the scalarized costs change.
    """
    params = MatchParams(theta1, theta2, instance.params.pi1, instance.params.pi2,
                         instance.params.gamma_kmh, instance.params.window_start,
                         instance.params.delta_t_min, instance.params.cs_radius_km)
    pairs = {key: PairCost(pc.w1, pc.w2, pc.chosen_cs,
                           int(round((theta1 * pc.w1 + theta2 * pc.w2) * SCALE)))
             for key, pc in instance.pairs.items()}
    max_cost_int = max((pc.cost_int for pc in pairs.values()), default=0)
    h_int = (max_cost_int * min(len(instance.evs), len(instance.riders)) + 1
             if instance.riders else 1)
    return MatchInstance(instance.evs, instance.riders, instance.stations,
                         instance.station_wait, params, pairs, h_int)


def _plan(instance: MatchInstance,
          chosen: list[tuple[int, str]]) -> MatchPlan:
    matched_int = sum(instance.pairs[key].cost_int for key in chosen)
    objective_int = matched_int + instance.h_int * (len(instance.riders) - len(chosen))
    matched_evs = {j for j, _ in chosen}
    matched_riders = {k for _, k in chosen}
    matches = sorted((j, k, instance.pairs[(j, k)].chosen_cs) for j, k in chosen)
    return MatchPlan(matches,
                     objective_int / SCALE,
                     objective_int,
                     matched_int / SCALE,
                     sorted(r.id for r in instance.riders
                            if r.id not in matched_riders),
                     sorted(e.id for e in instance.evs
                            if e.id not in matched_evs))


def solve(instance: MatchInstance) -> MatchPlan:
    """Exact optimum of the batch objective via square padded assignment.

    Layout: rows = EVs then |R| dummy EVs, columns = riders then |D| dummy
    riders. Real-real cells carry the scaled pair cost (forbidden when the
    pair is ineligible), dummy-real cells cost H (rider unmatched), and
    real-dummy / dummy-dummy cells cost 0.
    """
    n_ev, n_rid = len(instance.evs), len(instance.riders)
    if n_ev == 0 or n_rid == 0 or not instance.pairs:
        return _plan(instance, [])
    ev_index = {e.id: i for i, e in enumerate(instance.evs)}
    rider_index = {r.id: i for i, r in enumerate(instance.riders)}
    size = n_ev + n_rid
    cost = np.zeros((size, size))
    cost[:n_ev, :n_rid] = np.inf
    for (j, k), pc in instance.pairs.items():
        cost[ev_index[j], rider_index[k]] = pc.cost_int
    cost[n_ev:, :n_rid] = instance.h_int
    rows, cols = linear_sum_assignment(cost)
    chosen = [(instance.evs[r].id, instance.riders[c].id)
              for r, c in zip(rows, cols) if r < n_ev and c < n_rid]
    return _plan(instance, chosen)


BRUTE_FORCE_MAX = 8


def solve_bruteforce(instance: MatchInstance) -> MatchPlan:
    """Exhaustive oracle over all partial matchings (<= 8x8)."""
    n_ev, n_rid = len(instance.evs), len(instance.riders)
    if n_ev > BRUTE_FORCE_MAX or n_rid > BRUTE_FORCE_MAX:
        raise ValueError("instance exceeds brute-force bounds")
    ev_ids = [e.id for e in instance.evs]
    rider_ids = [r.id for r in instance.riders]
    best: tuple[int, list[tuple[int, str]]] | None = None

    def recurse(ki: int, used: set[int], acc: list[tuple[int, str]],
                cost_so_far: int) -> None:
        nonlocal best
        if ki == n_rid:
            if best is None or cost_so_far < best[0]:
                best = (cost_so_far, list(acc))
            return
        rid = rider_ids[ki]
        recurse(ki + 1, used, acc, cost_so_far + instance.h_int)
        for j in ev_ids:
            if j in used:
                continue
            pc = instance.pairs.get((j, rid))
            if pc is None:
                continue
            used.add(j)
            acc.append((j, rid))
            recurse(ki + 1, used, acc, cost_so_far + pc.cost_int)
            acc.pop()
            used.remove(j)

    recurse(0, set(), [], 0)
    assert best is not None
    return _plan(instance, best[1])


def max_cardinality(instance: MatchInstance) -> int:
    """Maximum matching size on the eligibility graph.

    Independent augmenting-path routine used to audit that solve() output
    is cardinality-maximal.
    """
    rider_index = {r.id: i for i, r in enumerate(instance.riders)}
    adj: dict[int, list[int]] = {e.id: [] for e in instance.evs}
    for (j, k) in instance.pairs:
        adj[j].append(rider_index[k])
    match_of_rider: dict[int, int] = {}

    def try_augment(j: int, seen: set[int]) -> bool:
        for ki in adj[j]:
            if ki in seen:
                continue
            seen.add(ki)
            if ki not in match_of_rider or try_augment(match_of_rider[ki], seen):
                match_of_rider[ki] = j
                return True
        return False

    count = 0
    for ev in instance.evs:
        if try_augment(ev.id, set()):
            count += 1
    return count


FORMAT_HEADER = "evdispatch-matching-instance"


def dump_instance(instance: MatchInstance, path: str | Path) -> None:
    """Text dump of raw inputs; loading rebuilds pair costs deterministically."""
    p = instance.params
    lines = [f"{FORMAT_HEADER} 1",
             f"params {p.theta1:.17g} {p.theta2:.17g} {p.pi1:.17g} {p.pi2:.17g} "
             f"{p.gamma_kmh:.17g} {p.window_start:.17g} {p.delta_t_min:.17g} "
             f"{p.cs_radius_km:.17g}"]
    for ev in instance.evs:
        lines.append(f"ev {ev.id} {ev.loc.lat:.17g} {ev.loc.lon:.17g} "
                     f"{ev.soc:.17g} {ev.consumption_rate:.17g} "
                     f"{ev.idle_cost_per_km:.17g}")
    for r in instance.riders:
        lines.append(f"rider {r.id} {r.origin.lat:.17g} {r.origin.lon:.17g} "
                     f"{r.dest.lat:.17g} {r.dest.lon:.17g} {r.req_time:.17g} "
                     f"{r.latest_departure:.17g} {r.trip_km:.17g}")
    for s in instance.stations:
        lines.append(f"station {s.id} {s.loc.lat:.17g} {s.loc.lon:.17g} "
                     f"{s.num_chargers} {instance.station_wait[s.id]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_instance(path: str | Path) -> MatchInstance:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split() != [FORMAT_HEADER, "1"]:
        raise ValueError(f"{path} is not a matching instance file")
    params: MatchParams | None = None
    evs: list[Ev] = []
    riders: list[RiderRequest] = []
    stations: list[ChargingStation] = []
    wait: dict[int, float] = {}
    for line in lines[1:]:
        tokens = line.split()
        if not tokens:
            continue
        if tokens[0] == "params":
            params = MatchParams(*(float(v) for v in tokens[1:9]))
        elif tokens[0] == "ev":
            evs.append(Ev(int(tokens[1]), GeoPoint(float(tokens[2]), float(tokens[3])),
                          float(tokens[4]), float(tokens[5]), float(tokens[6])))
        elif tokens[0] == "rider":
            riders.append(RiderRequest(tokens[1],
                                       GeoPoint(float(tokens[2]), float(tokens[3])),
                                       GeoPoint(float(tokens[4]), float(tokens[5])),
                                       float(tokens[6]), float(tokens[7]),
                                       float(tokens[8])))
        elif tokens[0] == "station":
            sid = int(tokens[1])
            stations.append(ChargingStation(
                sid, GeoPoint(float(tokens[2]), float(tokens[3])), int(tokens[4])))
            wait[sid] = float(tokens[5])
        else:
            raise ValueError(f"unexpected record {tokens[0]!r} in {path}")
    if params is None:
        raise ValueError(f"{path} has no params record")
    return build_instance(evs, riders, stations, wait, params)
