"""Proactive idle-EV guidance: SAA stochastic program solved exactly.

The model assigns idle EVs to region POIs ahead of demand, minimizing
idle travel cost plus sample-averaged over/under-supply penalties:

    sum_{i,j} alpha_j * g_ij * x_ij
      + (beta1/N) * sum_i sum_s max(0, n_i - d_is)
      + (beta2/N) * sum_i sum_s max(0, d_is - n_i)

subject to: each EV to at most one region, at most fleet_cap EVs guided,
and per-pair reachability (POI within the batching window at speed gamma)
and energy (omega*(g + avg_trip) + lam*soc <= soc) conditions. The big-M
reach/energy implications collapse to eligibility filtering because x is
binary.

Solution method: the SAA penalty is convex piecewise-linear in each
region's supply count, so its unit marginals are non-decreasing and the
whole problem is a min-cost flow — source->EV arcs (cap 1), EV->region
arcs for eligible pairs (cost alpha*g), and one unit arc per region supply
level priced at the penalty marginal. Costs are scaled to integer
micro-currency units times N so shortest-path comparisons are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Ev, GeoPoint, Rect, Region, distance
from .flow import MinCostFlow

SCALE = 10 ** 6


@dataclass(frozen=True)
class GuidanceParams:
    beta1: float
    beta2: float
    gamma_kmh: float
    delta_t_min: float
    lam: float
    fleet_cap: int | None = None

    def __post_init__(self) -> None:
        if self.beta1 <= 0.0 or self.beta2 <= 0.0:
            raise ValueError("penalty weights must be positive")
        if self.gamma_kmh <= 0.0 or self.delta_t_min <= 0.0:
            raise ValueError("speed and window duration must be positive")


@dataclass(frozen=True)
class GuidanceInstance:
    evs: list[Ev]
    regions: list[Region]
    scenarios: dict[int, np.ndarray]
    params: GuidanceParams
    n_scenarios: int
    # eligible (ev_id, region_id) -> guidance distance km
    pairs: dict[tuple[int, int], float]
    pair_cost_int: dict[tuple[int, int], int]
    b1_int: int
    b2_int: int
    # per region: penalty_int at supply 0 and marginals for supply 1..n_max
    penalty0_int: dict[int, int]
    marginals_int: dict[int, np.ndarray]

    @property
    def max_assignable(self) -> int:
        cap = self.params.fleet_cap
        n = len(self.evs)
        return n if cap is None else min(n, cap)

    def objective_float(self, objective_int: int) -> float:
        return objective_int / (SCALE * self.n_scenarios)


@dataclass(frozen=True)
class GuidancePlan:
    assignment: dict[int, int]      # ev_id -> region_id; unassigned omitted
    objective: float
    objective_int: int
    idle_cost: float
    over_cost: float
    under_cost: float

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.assignment.items())


def eligibility(ev: Ev, region: Region, params: GuidanceParams) -> bool:
    """Reach-and-energy test for guiding one EV to one region POI."""
    g = distance(ev.loc, region.poi)
    if 60.0 * g / params.gamma_kmh > params.delta_t_min:
        return False
    need = ev.consumption_rate * (g + region.avg_trip_km) + params.lam * ev.soc
    return need <= ev.soc


def region_penalty(n: int, scenarios: np.ndarray, beta1: float,
                   beta2: float) -> float:
    """Sample-average over/under-supply cost of placing n EVs in a region."""
    if n < 0:
        raise ValueError("supply count must be >= 0")
    scen = np.asarray(scenarios, dtype=float)
    over = np.maximum(0.0, n - scen).sum()
    under = np.maximum(0.0, scen - n).sum()
    return (beta1 * over + beta2 * under) / len(scen)


def _round_half_even(x: float) -> int:
    return int(round(x))


def _penalty_int(n: int, scen_sorted: np.ndarray, b1: int, b2: int) -> int:
    over = int(np.maximum(0, n - scen_sorted).sum())
    under = int(np.maximum(0, scen_sorted - n).sum())
    return b1 * over + b2 * under


def build_instance(evs: Sequence[Ev], regions: Sequence[Region],
                   scenarios: dict[int, np.ndarray],
                   params: GuidanceParams) -> GuidanceInstance:
    """Resolve eligibility, scale costs to integers, precompute marginals.

    Scenario arrays must be non-negative integers of a common length N.
    Raises if any region's precomputed marginals fail the convexity check
    that licenses the flow reduction (cannot happen for true SAA penalties;
    the assert guards against corrupted inputs).
    """
    evs = sorted(evs, key=lambda e: e.id)
    regions = sorted(regions, key=lambda r: r.id)
    lengths = {len(np.asarray(scenarios[r.id])) for r in regions}
    if len(lengths) != 1:
        raise ValueError("all regions need the same scenario count")
    n_scen = lengths.pop()
    if n_scen < 1:
        raise ValueError("need at least one scenario")
    b1 = _round_half_even(params.beta1 * SCALE)
    b2 = _round_half_even(params.beta2 * SCALE)
    pairs: dict[tuple[int, int], float] = {}
    pair_cost_int: dict[tuple[int, int], int] = {}
    for ev in evs:
        for region in regions:
            if not eligibility(ev, region, params):
                continue
            g = distance(ev.loc, region.poi)
            pairs[(ev.id, region.id)] = g
            pair_cost_int[(ev.id, region.id)] = (
                _round_half_even(ev.idle_cost_per_km * g * SCALE) * n_scen)
    n_max = len(evs) if params.fleet_cap is None else min(len(evs), params.fleet_cap)
    penalty0: dict[int, int] = {}
    marginals: dict[int, np.ndarray] = {}
    for region in regions:
        scen = np.asarray(scenarios[region.id], dtype=np.int64)
        if np.any(scen < 0):
            raise ValueError(f"negative demand scenario for region {region.id}")
        levels = np.array([_penalty_int(n, scen, b1, b2)
                           for n in range(n_max + 1)], dtype=np.int64)
        marg = np.diff(levels)
        if np.any(np.diff(marg) < 0):
            raise AssertionError(
                f"region {region.id}: penalty marginals not non-decreasing")
        penalty0[region.id] = int(levels[0])
        marginals[region.id] = marg
    return GuidanceInstance(list(evs), list(regions),
                            {r.id: np.asarray(scenarios[r.id], dtype=np.int64)
                             for r in regions},
                            params, n_scen, pairs, pair_cost_int,
                            b1, b2, penalty0, marginals)


def _plan_from_assignment(instance: GuidanceInstance,
                          assignment: dict[int, int],
                          objective_int: int) -> GuidancePlan:
    ev_by_id = {e.id: e for e in instance.evs}
    idle = sum(ev_by_id[j].idle_cost_per_km * instance.pairs[(j, i)]
               for j, i in assignment.items())
    counts = {r.id: 0 for r in instance.regions}
    for i in assignment.values():
        counts[i] += 1
    p = instance.params
    over = under = 0.0
    for region in instance.regions:
        scen = instance.scenarios[region.id].astype(float)
        n = counts[region.id]
        over += p.beta1 * float(np.maximum(0.0, n - scen).sum()) / instance.n_scenarios
        under += p.beta2 * float(np.maximum(0.0, scen - n).sum()) / instance.n_scenarios
    return GuidancePlan(dict(sorted(assignment.items())),
                        instance.objective_float(objective_int),
                        objective_int, idle, over, under)


def solve(instance: GuidanceInstance) -> GuidancePlan:
    """Global optimum of the SAA deterministic equivalent.

    Successive shortest paths on the flow network described in the module
    docstring; leaving an EV unguided is free, so augmentation stops once
    the next unit would raise total cost. Ties prefer lower EV and region
    ids through deterministic arc ordering.
    """
    evs, regions = instance.evs, instance.regions
    n_ev, n_reg = len(evs), len(regions)
    base_int = sum(instance.penalty0_int.values())
    if not instance.pairs or instance.max_assignable == 0:
        return _plan_from_assignment(instance, {}, base_int)
    source, sink = 0, 1 + n_ev + n_reg
    ev_node = {ev.id: 1 + k for k, ev in enumerate(evs)}
    reg_node = {r.id: 1 + n_ev + k for k, r in enumerate(regions)}
    net = MinCostFlow(sink + 1)
    ev_arcs: dict[int, tuple[int, int]] = {}
    for ev in evs:
        net.add_arc(source, ev_node[ev.id], 1, 0)
    for ev in evs:
        for region in regions:
            key = (ev.id, region.id)
            if key in instance.pairs:
                arc = net.add_arc(ev_node[ev.id], reg_node[region.id], 1,
                                  instance.pair_cost_int[key])
                ev_arcs[arc] = key
    for region in regions:
        for marg in instance.marginals_int[region.id]:
            net.add_arc(reg_node[region.id], sink, 1, int(marg))
    _, flow_cost = net.solve(source, sink, instance.max_assignable)
    assignment = {j: i for arc, (j, i) in ev_arcs.items() if net.flow_on(arc) == 1}
    return _plan_from_assignment(instance, assignment, flow_cost + base_int)


BRUTE_FORCE_MAX_EVS = 10
BRUTE_FORCE_MAX_REGIONS = 4
_CHUNK = 1 << 18


def solve_bruteforce(instance: GuidanceInstance) -> GuidancePlan:
    """Exhaustive oracle over all (regions+1)^n_evs assignments.

    Shares the instance's integer cost encoding but searches independently
    of the flow reduction. Refuses instances beyond 10 EVs / 4 regions.
    """
    evs, regions = instance.evs, instance.regions
    n_ev, n_reg = len(evs), len(regions)
    if n_ev > BRUTE_FORCE_MAX_EVS or n_reg > BRUTE_FORCE_MAX_REGIONS:
        raise ValueError("instance exceeds brute-force enumeration bounds")
    base_int = sum(instance.penalty0_int.values())
    if n_ev == 0:
        return _plan_from_assignment(instance, {}, base_int)
    # option 0 = unassigned; option r+1 = region index r. The ineligible
    # sentinel is sized so a row of sentinels cannot overflow int64 while
    # still dwarfing any feasible objective.
    big = np.int64(1) << 53
    cost = np.full((n_ev, n_reg + 1), big, dtype=np.int64)
    cost[:, 0] = 0
    for ei, ev in enumerate(evs):
        for ri, region in enumerate(regions):
            c = instance.pair_cost_int.get((ev.id, region.id))
            if c is not None:
                cost[ei, ri + 1] = c
    n_max = instance.max_assignable
    pen_levels = np.zeros((n_reg, n_ev + 1), dtype=np.int64)
    for ri, region in enumerate(regions):
        scen = instance.scenarios[region.id]
        pen_levels[ri] = [_penalty_int(n, scen, instance.b1_int, instance.b2_int)
                          for n in range(n_ev + 1)]
    total = (n_reg + 1) ** n_ev
    best_obj = None
    best_code = None
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = np.empty((len(idx), n_ev), dtype=np.int64)
        rest = idx.copy()
        for e in range(n_ev):
            digits[:, e] = rest % (n_reg + 1)
            rest //= (n_reg + 1)
        obj = np.zeros(len(idx), dtype=np.int64)
        assigned = np.zeros(len(idx), dtype=np.int64)
        for e in range(n_ev):
            obj += cost[e, digits[:, e]]
            assigned += digits[:, e] > 0
        for ri in range(n_reg):
            counts = (digits == ri + 1).sum(axis=1)
            obj += pen_levels[ri, counts]
        obj[(assigned > n_max) | (obj >= big)] = big
        k = int(np.argmin(obj))
        if best_obj is None or obj[k] < best_obj:
            best_obj = int(obj[k])
            best_code = digits[k].copy()
    assert best_obj is not None and best_obj < big
    assignment = {evs[e].id: regions[best_code[e] - 1].id
                  for e in range(n_ev) if best_code[e] > 0}
    return _plan_from_assignment(instance, assignment, best_obj)


FORMAT_HEADER = "evdispatch-guidance-instance"


def dump_instance(instance: GuidanceInstance, path: str | Path) -> None:
    """Line-oriented text dump of the raw inputs (repro cases).

    Loading rebuilds eligibility and scaled costs deterministically.
    """
    p = instance.params
    cap = "none" if p.fleet_cap is None else str(p.fleet_cap)
    lines = [f"{FORMAT_HEADER} 1",
             f"params {p.beta1:.17g} {p.beta2:.17g} {p.gamma_kmh:.17g} "
             f"{p.delta_t_min:.17g} {p.lam:.17g} {cap}"]
    for ev in instance.evs:
        lines.append(f"ev {ev.id} {ev.loc.lat:.17g} {ev.loc.lon:.17g} "
                     f"{ev.soc:.17g} {ev.consumption_rate:.17g} "
                     f"{ev.idle_cost_per_km:.17g}")
    for r in instance.regions:
        b = r.bounds
        lines.append(f"region {r.id} {r.poi.lat:.17g} {r.poi.lon:.17g} "
                     f"{r.avg_trip_km:.17g} {b.min_lat:.17g} {b.min_lon:.17g} "
                     f"{b.max_lat:.17g} {b.max_lon:.17g}")
    for rid in sorted(instance.scenarios):
        vals = ",".join(str(int(v)) for v in instance.scenarios[rid])
        lines.append(f"scenarios {rid} {vals}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_instance(path: str | Path) -> GuidanceInstance:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split() != [FORMAT_HEADER, "1"]:
        raise ValueError(f"{path} is not a guidance instance file")
    params: GuidanceParams | None = None
    evs: list[Ev] = []
    regions: list[Region] = []
    scenarios: dict[int, np.ndarray] = {}
    for line in lines[1:]:
        tokens = line.split()
        if not tokens:
            continue
        if tokens[0] == "params":
            cap = None if tokens[6] == "none" else int(tokens[6])
            params = GuidanceParams(float(tokens[1]), float(tokens[2]),
                                    float(tokens[3]), float(tokens[4]),
                                    float(tokens[5]), cap)
        elif tokens[0] == "ev":
            evs.append(Ev(int(tokens[1]), GeoPoint(float(tokens[2]), float(tokens[3])),
                          float(tokens[4]), float(tokens[5]), float(tokens[6])))
        elif tokens[0] == "region":
            regions.append(Region(int(tokens[1]),
                                  GeoPoint(float(tokens[2]), float(tokens[3])),
                                  Rect(float(tokens[5]), float(tokens[6]),
                                       float(tokens[7]), float(tokens[8])),
                                  float(tokens[4])))
        elif tokens[0] == "scenarios":
            scenarios[int(tokens[1])] = np.array(
                [int(v) for v in tokens[2].split(",")], dtype=np.int64)
        else:
            raise ValueError(f"unexpected record {tokens[0]!r} in {path}")
    if params is None:
        raise ValueError(f"{path} has no params record")
    return build_instance(evs, regions, scenarios, params)
