import numpy as np
import pytest

from evdispatch.core import Ev, GeoPoint, Rect, Region, distance
from evdispatch.guidance import (GuidanceParams, build_instance, dump_instance,
                                 eligibility, load_instance, region_penalty,
                                 solve, solve_bruteforce)

KM_PER_DEG_LAT = 111.194926644


def ev_at(ev_id, lat, lon, soc=0.8, rate=0.004, alpha=1.0):
    return Ev(ev_id, GeoPoint(lat, lon), soc, rate, alpha)


def region_at(rid, lat, lon, avg_trip=2.0, half=0.05):
    return Region(rid, GeoPoint(lat, lon),
                  Rect(lat - half, lon - half, lat + half, lon + half), avg_trip)


PARAMS = GuidanceParams(beta1=5.0, beta2=10.0, gamma_kmh=30.0,
                        delta_t_min=10.0, lam=0.1)


class TestEligibility:
    def test_time_feasible(self):
        # 4 km away: 8 minutes at 30 km/h fits in a 10-minute window
        region = region_at(0, 40.75, -73.98)
        ev = ev_at(0, 40.75 + 4.0 / KM_PER_DEG_LAT, -73.98)
        assert eligibility(ev, region, PARAMS)

    def test_time_infeasible(self):
        region = region_at(0, 40.75, -73.98, half=0.09)
        ev = ev_at(0, 40.75 + 6.0 / KM_PER_DEG_LAT, -73.98)
        assert not eligibility(ev, region, PARAMS)

    def test_soc_constraint(self):
        # omega*(g + trip) = 0.05 and lam*soc = 0.01 -> 0.06 <= 0.10 feasible
        region = region_at(0, 40.75, -73.98, avg_trip=8.75)
        g = 3.75
        ev = ev_at(0, 40.75 + g / KM_PER_DEG_LAT, -73.98, soc=0.10, rate=0.004)
        gd = distance(ev.loc, region.poi)
        assert abs(ev.consumption_rate * (gd + region.avg_trip_km) - 0.05) < 1e-5
        assert eligibility(ev, region, PARAMS)
        # with soc just below the requirement it flips
        low = ev_at(0, ev.loc.lat, ev.loc.lon, soc=0.055, rate=0.004)
        assert not eligibility(low, region, PARAMS)


class TestRegionPenalty:
    def test_hand_enumeration(self):
        val = region_penalty(2, np.array([1, 1, 3]), 5.0, 10.0)
        assert abs(val - 20.0 / 3.0) < 1e-12

    def test_perfect_balance(self):
        assert region_penalty(4, np.array([4, 4, 4]), 5.0, 10.0) == 0.0

    def test_pure_under_supply(self):
        assert region_penalty(0, np.array([2]), 5.0, 10.0) == 20.0

    def test_negative_supply_rejected(self):
        with pytest.raises(ValueError):
            region_penalty(-1, np.array([1]), 5.0, 10.0)


def make_instance(evs, regions, scenarios, cap=None):
    params = GuidanceParams(5.0, 10.0, 30.0, 10.0, 0.1, cap)
    return build_instance(evs, regions, scenarios, params)


class TestSolve:
    def test_single_ev_assigned_when_cheaper(self):
        region = region_at(0, 40.75, -73.98)
        ev = ev_at(0, 40.75 + 1.0 / KM_PER_DEG_LAT, -73.98, alpha=1.0)
        inst = make_instance([ev], [region], {0: np.array([1])})
        plan = solve(inst)
        assert plan.assignment == {0: 0}
        g = inst.pairs[(0, 0)]
        assert abs(plan.objective - 1.0 * g) < 1e-9

    def test_no_eligible_pairs(self):
        region = region_at(0, 40.75, -73.98, half=0.12)
        ev = ev_at(0, 40.75 + 7.0 / KM_PER_DEG_LAT, -73.98)
        inst = make_instance([ev], [region], {0: np.array([2])})
        plan = solve(inst)
        assert plan.assignment == {}
        assert abs(plan.objective - 20.0) < 1e-9   # beta2 * 2

    def test_two_evs_marginal_cutoff(self):
        # second assignment would add cost 2 + over-supply 5 with no gain
        region = region_at(0, 40.75, -73.98)
        lat = 40.75 + 1.0 / KM_PER_DEG_LAT
        e1 = ev_at(0, lat, -73.98, alpha=1.0 / distance(GeoPoint(lat, -73.98), region.poi))
        e2 = ev_at(1, lat, -73.981, alpha=2.0 / distance(GeoPoint(lat, -73.981), region.poi))
        inst = make_instance([e1, e2], [region], {0: np.array([1])})
        plan = solve(inst)
        assert plan.assignment == {0: 0}
        assert abs(plan.objective - 1.0) < 1e-6

    def test_fleet_cap_respected(self):
        region = region_at(0, 40.75, -73.98)
        evs = [ev_at(i, 40.75 + 1.0 / KM_PER_DEG_LAT, -73.98 + 0.001 * i)
               for i in range(4)]
        inst = make_instance(evs, [region], {0: np.array([4])}, cap=2)
        plan = solve(inst)
        assert len(plan.assignment) == 2

    def test_breakdown_consistent(self):
        region = region_at(0, 40.75, -73.98)
        evs = [ev_at(i, 40.75 + 1.0 / KM_PER_DEG_LAT, -73.98 + 0.002 * i)
               for i in range(3)]
        inst = make_instance(evs, [region], {0: np.array([2, 4])})
        plan = solve(inst)
        total = plan.idle_cost + plan.over_cost + plan.under_cost
        assert abs(total - plan.objective) < 1e-6 * max(1.0, abs(plan.objective))

    def test_convexity_assert_on_marginals(self):
        region = region_at(0, 40.75, -73.98)
        ev = ev_at(0, 40.75, -73.98)
        inst = make_instance([ev], [region], {0: np.array([0, 1, 5])})
        marg = inst.marginals_int[0]
        assert (np.diff(marg) >= 0).all()


def random_instance(rng, max_evs=8, max_regions=3, max_scen=20):
    n_ev = int(rng.integers(0, max_evs + 1))
    n_reg = int(rng.integers(1, max_regions + 1))
    n_scen = int(rng.integers(1, max_scen + 1))
    regions = []
    for i in range(n_reg):
        lat = 40.70 + 0.035 * i
        regions.append(region_at(i, lat, -73.98, avg_trip=float(rng.uniform(1.0, 4.0))))
    evs = []
    for j in range(n_ev):
        lat = float(rng.uniform(40.68, 40.80))
        lon = float(rng.uniform(-74.02, -73.94))
        evs.append(ev_at(j, lat, lon, soc=float(rng.uniform(0.05, 0.8)),
                         rate=float(rng.choice([0.0029, 0.0044, 0.0047])),
                         alpha=float(rng.uniform(0.8, 1.1))))
    scen = {r.id: rng.integers(0, 8, size=n_scen).astype(np.int64)
            for r in regions}
    cap = int(rng.integers(0, n_ev + 2)) if rng.uniform() < 0.4 else None
    return make_instance(evs, regions, scen, cap)


class TestOracleEquivalence:
    def test_500_random_instances(self):
        rng = np.random.default_rng(77)
        for _ in range(500):
            inst = random_instance(rng)
            fast = solve(inst)
            brute = solve_bruteforce(inst)
            assert fast.objective_int == brute.objective_int

    def test_monotone_response_in_beta2(self):
        rng = np.random.default_rng(78)
        for _ in range(60):
            n_ev = int(rng.integers(1, 7))
            regions = [region_at(i, 40.70 + 0.035 * i, -73.98) for i in range(2)]
            evs = [ev_at(j, float(rng.uniform(40.68, 40.78)),
                         float(rng.uniform(-74.0, -73.96)),
                         soc=float(rng.uniform(0.2, 0.8)))
                   for j in range(n_ev)]
            scen = {r.id: rng.integers(0, 6, size=5).astype(np.int64)
                    for r in regions}
            guided = []
            for beta2 in (6.0, 10.0, 20.0):
                params = GuidanceParams(5.0, beta2, 30.0, 10.0, 0.1)
                plan = solve(build_instance(evs, regions, scen, params))
                guided.append(len(plan.assignment))
            assert guided[0] <= guided[1] <= guided[2]

    def test_plans_feasible(self):
        from evdispatch.validate import validate_guidance_plan
        rng = np.random.default_rng(79)
        for _ in range(100):
            inst = random_instance(rng)
            plan = solve(inst)
            assert validate_guidance_plan(inst, plan.pairs(), plan.objective) == []

    def test_determinism(self):
        rng = np.random.default_rng(80)
        inst = random_instance(rng)
        a, b = solve(inst), solve(inst)
        assert a.assignment == b.assignment
        assert a.objective_int == b.objective_int

    def test_empty_instance(self):
        region = region_at(0, 40.75, -73.98)
        inst = make_instance([], [region], {0: np.array([3])})
        fast, brute = solve(inst), solve_bruteforce(inst)
        assert fast.assignment == {} == brute.assignment
        assert fast.objective_int == brute.objective_int

    def test_bruteforce_bounds(self):
        rng = np.random.default_rng(81)
        regions = [region_at(i, 40.70 + 0.03 * i, -73.98) for i in range(3)]
        evs = [ev_at(j, 40.72, -73.98) for j in range(11)]
        scen = {r.id: np.array([1]) for r in regions}
        inst = make_instance(evs, regions, scen)
        with pytest.raises(ValueError):
            solve_bruteforce(inst)


class TestDumpLoad:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(82)
        inst = random_instance(rng, max_evs=5)
        path = tmp_path / "instance.txt"
        dump_instance(inst, path)
        back = load_instance(path)
        assert set(back.pairs) == set(inst.pairs)
        assert back.pair_cost_int == inst.pair_cost_int
        assert solve(back).objective_int == solve(inst).objective_int

    def test_reject_foreign_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("hello\n")
        with pytest.raises(ValueError):
            load_instance(path)
