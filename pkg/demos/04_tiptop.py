"""Reserving capacity ahead of predicted demand.

The reservation step keeps the nodes that serve multimedia now and will
again next slot (Y), and steers concurrent services away from every node the
next placement needs (Gamma). A two-day simulation then compares the four
strategies.

Run: python demos/04_tiptop.py   (under a minute)
"""
# %%
from fogplace.placement import NodeState
from fogplace.reservation import ConcurrentService, apply_reservation, make_plan, predicted_solution, reserve
from fogplace.simulate import SimConfig, build_scenario, run_all
from fogplace.topology import FogNode, Topology
from fogplace.workload import DemandSnapshot

print("reserve({E, C}, {E, C, D}) ->", reserve({"E", "C"}, {"E", "C", "D"}))

# %% A five-station tree: B and E share a parent, as do C and D
A, B, C, D, E = range(5)
pos = {A: (20_000.0, 0.0), B: (0.0, 0.0), C: (5000.0, 0.0), D: (5500.0, 0.0), E: (500.0, 0.0)}
nodes = {i: FogNode(i, 0, p) for i, p in pos.items()}
for agg, kids in ((5, [B, E]), (6, [C, D]), (7, [A])):
    nodes[agg] = FogNode(agg, 1, (0.0, 0.0), parent=8, children=kids)
    for k in kids:
        nodes[k].parent = agg
nodes[8] = FogNode(8, 2, (0.0, 0.0), children=[5, 6, 7])
topo = Topology(nodes, 3)

state = {n: NodeState(100.0) for n in topo.nodes}
forecast = DemandSnapshot(1, {C: 10.0, D: 10.0, E: 10.0})
plan = make_plan(1, {E, C}, predicted_solution(topo, forecast, state))
result = apply_reservation(state, plan, [ConcurrentService(7, E, 25.0, E)], topo)
name = "ABCDE"
print("Y =", sorted(name[n] for n in plan.Y), " Gamma =", sorted(name[n] for n in plan.Gamma))
print("concurrent service 7 moved:", [(s, name[a], name[b]) for s, a, b in result.migrations])

# %% Two simulated days on a 12-region layout
scenario = build_scenario(regions=12, days=2, warmup_days=2, seed=1)
reports = run_all(scenario.topology, scenario.snapshots, scenario.forecasts, SimConfig(seed=1))
for name, r in reports.items():
    print(f"{name:>8}: latency {r.avg_latency_ms:6.2f} ms  packets {r.packet_delivery_rate:.5f}  "
          f"content {r.content_delivery_rate:.4f}  link {r.link_usage:8.1f}  migration {r.migration_usage:8.1f}")
