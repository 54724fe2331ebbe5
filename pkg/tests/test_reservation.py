import numpy as np
from hypothesis import given, strategies as st

from fogplace.placement import NodeState, build_instance, solve
from fogplace.reservation import (ConcurrentService, ReservationPlan, apply_reservation, make_plan,
                                  predicted_placement, predicted_solution, reserve)
from fogplace.topology import FogNode, Topology, assign_resources, build_hierarchy, check_topology, random_stations
from fogplace.workload import DemandSnapshot

A, B, C, D, E = range(5)


def five_station_topology():
    """Stations A..E; B and E share an aggregation node, so do C and D; A hangs off its own."""
    pos = {A: (20_000.0, 0.0), B: (0.0, 0.0), C: (5000.0, 0.0), D: (5500.0, 0.0), E: (500.0, 0.0)}
    nodes = {i: FogNode(i, 0, p) for i, p in pos.items()}
    for agg, kids in ((5, [B, E]), (6, [C, D]), (7, [A])):
        nodes[agg] = FogNode(agg, 1, (0.0, 0.0), parent=8, children=kids)
        for k in kids:
            nodes[k].parent = agg
    nodes[8] = FogNode(8, 2, (0.0, 0.0), children=[5, 6, 7])
    topo = Topology(nodes, 3)
    assert check_topology(topo) == []
    return topo


class TestReserveAlgebra:
    def test_walkthrough(self):
        assert reserve({"E", "C"}, {"E", "C", "D"}) == (frozenset({"E", "C"}), frozenset({"E", "C", "D"}))

    def test_disjoint(self):
        assert reserve({1, 2}, {3}) == (frozenset(), frozenset({3}))

    def test_idempotent(self):
        assert reserve({1, 2}, {1, 2}) == (frozenset({1, 2}), frozenset({1, 2}))

    @given(st.frozensets(st.integers(0, 30)), st.frozensets(st.integers(0, 30)))
    def test_laws(self, a, p):
        y, gamma = reserve(a, p)
        assert y <= a and y <= p and y <= gamma
        assert gamma >= p
        assert gamma == y | p


class TestPredictedPlacement:
    def test_empty_forecast(self):
        topo = five_station_topology()
        state = {n: NodeState(100.0) for n in topo.nodes}
        assert predicted_placement(topo, DemandSnapshot(1, {}), state) == frozenset()

    def test_five_station_prediction(self):
        topo = five_station_topology()
        state = {n: NodeState(100.0) for n in topo.nodes}
        forecast = DemandSnapshot(1, {C: 10.0, D: 10.0, E: 10.0})
        assert predicted_placement(topo, forecast, state) == frozenset({E, C, D})

    def test_perfect_forecast_matches_actual(self):
        topo = assign_resources(build_hierarchy(random_stations(15, seed=2), radius_m=2500), seed=2)
        state = {n: NodeState(50.0) for n in topo.nodes}
        snap = DemandSnapshot(4, {0: 20.0, 3: 35.0, 7: 12.0, 11: 60.0})
        actual = solve(build_instance(topo, snap, state)).open_nodes
        assert predicted_placement(topo, snap, state) == frozenset(actual)


class TestApplyReservation:
    def test_full_reservation_without_conflict(self):
        topo = five_station_topology()
        state = {n: NodeState(100.0) for n in topo.nodes}
        plan = ReservationPlan(1, {E, C}, {E, C, D}, {E: 30.0, C: 20.0})
        res = apply_reservation(state, plan, [], topo)
        assert res.state[E].reserved == 30.0 and res.state[C].reserved == 20.0
        assert res.migrations == []
        assert state[E].reserved == 0.0  # input left untouched

    def test_concurrent_service_moves_to_b(self):
        topo = five_station_topology()
        state = {n: NodeState(100.0) for n in topo.nodes}
        forecast = DemandSnapshot(1, {C: 10.0, D: 10.0, E: 10.0})
        plan = make_plan(1, {E, C}, predicted_solution(topo, forecast, state))
        assert plan.Y == {E, C} and plan.Gamma == {E, C, D}
        svc = ConcurrentService(7, E, 25.0, E)
        res = apply_reservation(state, plan, [svc], topo)
        assert res.migrations == [(7, E, B)]
        assert res.placed[7] == B
        assert res.state[B].used == 25.0
        assert plan.migrations == [(7, E, B)]

    def test_without_plan_service_stays(self):
        topo = five_station_topology()
        state = {n: NodeState(100.0) for n in topo.nodes}
        res = apply_reservation(state, None, [ConcurrentService(1, E, 25.0, E)], topo)
        assert res.placed[1] == E and res.migrations == []

    def test_waiver_when_no_target(self):
        topo = five_station_topology()
        # Only E has capacity, so the service cannot leave; it needs 30 of E's 40.
        state = {n: NodeState(40.0 if n == E else 1.0) for n in topo.nodes}
        plan = ReservationPlan(1, {E}, {E}, {E: 25.0})
        res = apply_reservation(state, plan, [ConcurrentService(3, E, 30.0, E)], topo)
        assert res.migrations == []
        assert res.waivers == [(E, 15.0, 3)]
        assert res.state[E].reserved == 10.0 and res.state[E].used == 30.0
        assert any(a["event"] == "waive" for a in res.audit)

    def test_latency_limit_blocks_migration(self):
        topo = five_station_topology()
        state = {n: NodeState(100.0) for n in topo.nodes}
        plan = ReservationPlan(1, {E, B}, {E, B}, {E: 10.0, B: 10.0})
        res = apply_reservation(state, plan, [ConcurrentService(4, E, 5.0, E, max_latency_ms=1.0)], topo)
        assert res.migrations == [] and res.placed[4] == E

    def test_reservation_bounded_by_free(self):
        topo = five_station_topology()
        state = {n: NodeState(10.0, used=6.0) for n in topo.nodes}
        plan = ReservationPlan(1, {C}, {C}, {C: 9.0})
        res = apply_reservation(state, plan, [], topo)
        assert res.state[C].reserved == 4.0
        assert res.audit[0] == {"event": "reserve", "t": 1, "node": C, "requested": 9.0, "reserved": 4.0}

    @given(st.integers(0, 10**6))
    def test_state_invariants(self, seed):
        topo = five_station_topology()
        rng = np.random.default_rng(seed)
        state = {n: NodeState(float(rng.uniform(5, 50))) for n in topo.nodes}
        y = frozenset(int(n) for n in rng.choice(9, size=int(rng.integers(0, 5)), replace=False))
        gamma = y | frozenset(int(n) for n in rng.choice(9, size=2, replace=False))
        plan = ReservationPlan(1, y, gamma, {n: float(rng.uniform(0, 40)) for n in y})
        conc = [ConcurrentService(i, int(rng.integers(9)), float(rng.uniform(1, 30)), int(rng.integers(5)))
                for i in range(6)]
        res = apply_reservation(state, plan, conc, topo)
        for n, s in res.state.items():
            assert s.used + s.reserved <= s.capacity + 1e-9
            assert s.reserved <= plan.reserved_capacity.get(n, 0.0) + 1e-12
        for sid, a, b in res.migrations:
            assert a in y and b not in gamma
        assert plan.problems() == []


class TestPlan:
    def test_reserved_volume_is_predicted_load(self):
        topo = five_station_topology()
        state = {n: NodeState(100.0) for n in topo.nodes}
        pred = predicted_solution(topo, DemandSnapshot(1, {C: 10.0, D: 12.0, E: 14.0}), state)
        plan = make_plan(1, {E, C, A}, pred)
        assert plan.reserved_capacity == {C: 10.0, E: 14.0}

    def test_no_prediction(self):
        plan = make_plan(2, {1, 2}, None)
        assert plan.Y == frozenset() and plan.Gamma == frozenset()

    def test_problems_detected(self):
        plan = ReservationPlan(1, {1, 2}, {1}, {3: -1.0})
        assert len(plan.problems()) == 3

    def test_json_round_trip(self):
        plan = ReservationPlan(3, {1}, {1, 4}, {1: 2.5}, [(9, 1, 5)])
        assert ReservationPlan.from_dict(plan.to_dict()).dumps() == plan.dumps()
