import numpy as np
import pytest

from evdispatch.core import (ChargingStation, Ev, GeoPoint, distance,
                             make_rider)
from evdispatch.matching import (MatchInstance, MatchParams, PairCost,
                                 build_instance, cs_cost, dump_instance,
                                 eligibility, load_instance, max_cardinality,
                                 reweight, rider_wait, solve, solve_bruteforce)

KM_PER_DEG_LAT = 111.194926644

PARAMS = MatchParams(theta1=1.0, theta2=10.0, pi1=1.0, pi2=10.0,
                     gamma_kmh=30.0, window_start=0.0, delta_t_min=10.0,
                     cs_radius_km=3.0)


def pt(lat, lon):
    return GeoPoint(lat, lon)


def north_of(p, km):
    return GeoPoint(p.lat + km / KM_PER_DEG_LAT, p.lon)


DEST = pt(40.75, -73.96)


class TestCsCost:
    def test_single_station_formula(self):
        # dist 1 km, wait 4 min, reserve 0.4 -> 1 + 10*4/0.4 = 101
        station = ChargingStation(0, north_of(DEST, 1.0), 2)
        rider = make_rider("k", pt(40.74, -73.97), DEST, 0.0, 30.0)
        reserve_target = 0.4
        soc = reserve_target + 0.004 * rider.trip_km
        ev = Ev(0, pt(40.74, -73.97), soc, 0.004, 1.0)
        w1, cs = cs_cost(ev, rider, [station], {0: 4.0}, PARAMS)
        d = distance(DEST, station.loc)
        assert cs == 0
        assert abs(w1 - (d + 10.0 * 4.0 / 0.4)) < 1e-9
        assert abs(w1 - 101.0) < 0.01

    def test_prefers_short_wait_station(self):
        near_busy = ChargingStation(0, north_of(DEST, 1.0), 2)
        far_free = ChargingStation(1, north_of(DEST, 2.0), 2)
        rider = make_rider("k", pt(40.74, -73.97), DEST, 0.0, 30.0)
        ev = Ev(0, pt(40.74, -73.97), 0.4 + 0.004 * rider.trip_km, 0.004, 1.0)
        w1, cs = cs_cost(ev, rider, [near_busy, far_free], {0: 4.0, 1: 0.0}, PARAMS)
        assert cs == 1
        assert abs(w1 - distance(DEST, far_free.loc)) < 1e-6

    def test_wait_free_reduces_to_distance(self):
        stations = [ChargingStation(i, north_of(DEST, 1.0 + i), 1) for i in range(3)]
        rider = make_rider("k", pt(40.74, -73.97), DEST, 0.0, 30.0)
        ev = Ev(0, pt(40.74, -73.97), 0.7, 0.004, 1.0)
        w1, cs = cs_cost(ev, rider, stations, {i: 0.0 for i in range(3)}, PARAMS)
        assert cs == 0
        assert abs(w1 - PARAMS.pi1 * distance(DEST, stations[0].loc)) < 1e-9

    def test_low_soc_amplifies_wait(self):
        """Lower post-trip SoC makes the wait margin between stations larger."""
        low_wait = ChargingStation(0, north_of(DEST, 2.0), 1)
        high_wait = ChargingStation(1, north_of(DEST, 1.0), 1)
        waits = {0: 1.0, 1: 8.0}
        rider = make_rider("k", pt(40.74, -73.97), DEST, 0.0, 30.0)
        low = Ev(0, pt(40.74, -73.97), 0.25, 0.004, 1.0)
        high = Ev(1, pt(40.74, -73.97), 0.75, 0.004, 1.0)

        def margin(ev):
            base = dict(PARAMS.__dict__)
            w_low = (PARAMS.pi1 * distance(DEST, low_wait.loc)
                     + PARAMS.pi2 * waits[0] / (ev.soc - ev.consumption_rate * rider.trip_km))
            w_high = (PARAMS.pi1 * distance(DEST, high_wait.loc)
                      + PARAMS.pi2 * waits[1] / (ev.soc - ev.consumption_rate * rider.trip_km))
            return w_high - w_low

        assert margin(low) > margin(high) > 0


class TestRiderWait:
    def test_formula(self):
        rider = make_rider("k", pt(40.75, -73.96), DEST, 5.0, 30.0)
        ev_loc = north_of(rider.origin, 5.0)
        ev = Ev(0, ev_loc, 0.7, 0.004, 1.0)
        w2 = rider_wait(ev, rider, PARAMS)
        assert abs(w2 - (10.0 - 5.0 + 60.0 * distance(ev_loc, rider.origin) / 30.0)) < 1e-9
        assert abs(w2 - 15.0) < 0.01

    def test_zero_case(self):
        rider = make_rider("k", pt(40.75, -73.96), DEST, 10.0, 30.0)
        ev = Ev(0, rider.origin, 0.7, 0.004, 1.0)
        assert rider_wait(ev, rider, PARAMS) == 0.0

    def test_carried_rider_grows_by_window(self):
        rider = make_rider("k", pt(40.75, -73.96), DEST, 5.0, 60.0)
        ev = Ev(0, north_of(rider.origin, 5.0), 0.7, 0.004, 1.0)
        later = MatchParams(1.0, 10.0, 1.0, 10.0, 30.0, 10.0, 10.0, 3.0)
        assert abs(rider_wait(ev, rider, later) - 25.0) < 0.01

    def test_future_request_rejected(self):
        rider = make_rider("k", pt(40.75, -73.96), DEST, 25.0, 60.0)
        ev = Ev(0, rider.origin, 0.7, 0.004, 1.0)
        with pytest.raises(ValueError):
            rider_wait(ev, rider, PARAMS)


class TestEligibility:
    def station(self):
        return ChargingStation(0, north_of(DEST, 2.0), 1)

    def test_energy_feasible(self):
        rider = make_rider("k", pt(40.74, -73.97), DEST, 0.0, 60.0)
        need = 0.004 * (rider.trip_km + distance(DEST, self.station().loc))
        ev = Ev(0, pt(40.74, -73.97), need + 0.01, 0.004, 1.0)
        assert eligibility(ev, rider, [self.station()], PARAMS)

    def test_energy_infeasible(self):
        rider = make_rider("k", pt(40.74, -73.97), DEST, 0.0, 60.0)
        need = 0.004 * (rider.trip_km + distance(DEST, self.station().loc))
        ev = Ev(0, pt(40.74, -73.97), need - 0.001, 0.004, 1.0)
        assert not eligibility(ev, rider, [self.station()], PARAMS)

    def test_latest_departure(self):
        # pickup arrival at ST + dT + 8 min vs ldt at ST + dT + 6 -> reject
        origin = pt(40.74, -73.97)
        rider_tight = make_rider("k", origin, DEST, 0.0, 16.0)
        ev = Ev(0, north_of(origin, 4.0), 0.7, 0.004, 1.0)
        assert not eligibility(ev, rider_tight, [self.station()], PARAMS)
        rider_ok = make_rider("k", origin, DEST, 0.0, 18.01)
        assert eligibility(ev, rider_ok, [self.station()], PARAMS)

    def test_boundary_closed(self):
        origin = pt(40.74, -73.97)
        ev = Ev(0, north_of(origin, 4.0), 0.7, 0.004, 1.0)
        arrival = 10.0 + 60.0 * distance(ev.loc, origin) / 30.0
        rider = make_rider("k", origin, DEST, 0.0, arrival)
        assert eligibility(ev, rider, [self.station()], PARAMS)


def handcrafted_instance(cost_matrix, h=None):
    """Instance with explicit integer pair costs; None marks ineligible."""
    n_ev, n_rid = len(cost_matrix), len(cost_matrix[0])
    evs = [Ev(j, pt(40.70 + 0.001 * j, -73.98), 0.7, 0.004, 1.0)
           for j in range(n_ev)]
    riders = [make_rider(f"r{k}", pt(40.71, -73.97 - 0.001 * k), DEST, 0.0, 60.0)
              for k in range(n_rid)]
    station = ChargingStation(0, DEST, 1)
    pairs = {}
    max_cost = 0
    for j in range(n_ev):
        for k in range(n_rid):
            c = cost_matrix[j][k]
            if c is None:
                continue
            pairs[(j, f"r{k}")] = PairCost(0.0, 0.0, 0, c)
            max_cost = max(max_cost, c)
    h_int = h if h is not None else max_cost * min(n_ev, n_rid) + 1
    return MatchInstance(evs, riders, [station], {0: 0.0}, PARAMS, pairs, h_int)


class TestSolve:
    def test_forced_single_match(self):
        inst = handcrafted_instance([[150_000_000]])
        plan = solve(inst)
        assert [(j, k) for j, k, _ in plan.matches] == [(0, "r0")]
        assert plan.objective_int == 150_000_000

    def test_argmin_pair(self):
        inst = handcrafted_instance([[150_000_000], [140_000_000]])
        plan = solve(inst)
        assert [(j, k) for j, k, _ in plan.matches] == [(1, "r0")]

    def test_greedy_trap(self):
        # greedy would take 5 then 100; optimum is 10 + 20
        inst = handcrafted_instance([[5_000_000, 10_000_000],
                                     [20_000_000, 100_000_000]])
        plan = solve(inst)
        assert plan.objective_int == 30_000_000
        brute = solve_bruteforce(inst)
        assert brute.objective_int == 30_000_000

    def test_cardinality_beats_cost(self):
        # matching both riders is mandatory even at huge pair cost
        inst = handcrafted_instance([[1, 2_000_000_000],
                                     [None, 3_000_000_000]])
        plan = solve(inst)
        assert len(plan.matches) == 2

    def test_unmatched_rider_priced_with_h(self):
        inst = handcrafted_instance([[None, 5_000_000]])
        plan = solve(inst)
        assert len(plan.matches) == 1
        assert plan.unmatched_riders == ["r0"]
        assert plan.objective_int == 5_000_000 + inst.h_int

    def test_empty_instance(self):
        inst = handcrafted_instance([[None]])
        inst2 = MatchInstance([], [], inst.stations, {0: 0.0}, PARAMS, {}, 1)
        assert solve(inst2).matches == []
        assert solve_bruteforce(inst2).matches == []


def random_instance(rng, max_side=7):
    n_ev = int(rng.integers(0, max_side + 1))
    n_rid = int(rng.integers(0, max_side + 1))
    stations = [ChargingStation(i,
                                pt(float(rng.uniform(40.70, 40.78)),
                                   float(rng.uniform(-74.0, -73.92))),
                                int(rng.integers(1, 4)))
                for i in range(int(rng.integers(1, 5)))]
    waits = {s.id: float(rng.uniform(0.0, 25.0)) for s in stations}
    evs = [Ev(j, pt(float(rng.uniform(40.70, 40.78)),
                    float(rng.uniform(-74.0, -73.92))),
              float(rng.uniform(0.05, 0.8)),
              float(rng.choice([0.0029, 0.0044, 0.0047])), 1.0)
           for j in range(n_ev)]
    riders = []
    for k in range(n_rid):
        origin = pt(float(rng.uniform(40.70, 40.78)),
                    float(rng.uniform(-74.0, -73.92)))
        dest = pt(float(rng.uniform(40.70, 40.78)),
                  float(rng.uniform(-74.0, -73.92)))
        req = float(rng.uniform(0.0, 10.0))
        riders.append(make_rider(f"r{k}", origin, dest, req,
                                 req + float(rng.uniform(5.0, 40.0))))
    return build_instance(evs, riders, stations, waits, PARAMS)


class TestOracleEquivalence:
    def test_500_random_instances(self):
        rng = np.random.default_rng(55)
        for _ in range(500):
            inst = random_instance(rng)
            fast = solve(inst)
            brute = solve_bruteforce(inst)
            assert fast.objective_int == brute.objective_int
            assert len(fast.matches) == max_cardinality(inst)

    def test_scalar_ops_agree_with_vectorized_builder(self):
        rng = np.random.default_rng(56)
        for _ in range(40):
            inst = random_instance(rng, max_side=5)
            for ev in inst.evs:
                for rider in inst.riders:
                    ok = eligibility(ev, rider, inst.stations, inst.params)
                    key = (ev.id, rider.id)
                    assert ok == (key in inst.pairs)
                    if ok:
                        w1, cs = cs_cost(ev, rider, inst.stations,
                                         inst.station_wait, inst.params)
                        w2 = rider_wait(ev, rider, inst.params)
                        assert abs(w1 - inst.pairs[key].w1) < 1e-9
                        assert abs(w2 - inst.pairs[key].w2) < 1e-9
                        assert cs == inst.pairs[key].chosen_cs

    def test_plans_valid(self):
        from evdispatch.validate import validate_match_plan
        rng = np.random.default_rng(57)
        for _ in range(100):
            inst = random_instance(rng)
            plan = solve(inst)
            assert validate_match_plan(inst, plan.matches, plan.objective) == []

    def test_determinism(self):
        rng = np.random.default_rng(58)
        inst = random_instance(rng)
        assert solve(inst).matches == solve(inst).matches

    def test_bruteforce_bounds(self):
        rng = np.random.default_rng(59)
        while True:
            inst = random_instance(rng, max_side=7)
            if len(inst.evs) >= 1:
                break
        big = MatchInstance(inst.evs * 2 + [Ev(100 + i, DEST, 0.5, 0.004, 1.0)
                                            for i in range(9)],
                            inst.riders, inst.stations, inst.station_wait,
                            inst.params, inst.pairs, inst.h_int)
        with pytest.raises(ValueError):
            solve_bruteforce(big)


class TestReweight:
    def test_preserves_eligibility(self):
        rng = np.random.default_rng(60)
        inst = random_instance(rng)
        rw = reweight(inst, 0.0, 10.0)
        assert set(rw.pairs) == set(inst.pairs)

    def test_costs_recomputed(self):
        rng = np.random.default_rng(61)
        inst = random_instance(rng)
        rw = reweight(inst, 0.0, 10.0)
        for key, pc in rw.pairs.items():
            assert pc.cost_int == int(round(10.0 * pc.w2 * 10 ** 6))

    def test_same_cardinality_across_weights(self):
        rng = np.random.default_rng(62)
        for _ in range(50):
            inst = random_instance(rng)
            base = len(solve(inst).matches)
            for t1, t2 in ((0.0, 10.0), (1.0, 0.0), (3.0, 2.0)):
                assert len(solve(reweight(inst, t1, t2)).matches) == base


class TestDumpLoad:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(63)
        inst = random_instance(rng, max_side=5)
        path = tmp_path / "instance.txt"
        dump_instance(inst, path)
        back = load_instance(path)
        assert set(back.pairs) == set(inst.pairs)
        for key in inst.pairs:
            assert back.pairs[key].cost_int == inst.pairs[key].cost_int
        assert solve(back).objective_int == solve(inst).objective_int

    def test_reject_foreign_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("nope 1\n")
        with pytest.raises(ValueError):
            load_instance(path)
