"""Placing one slot's demand on fog nodes.

Each open node costs one unit and each unit of demand costs its latency.
The exact branch-and-bound solver, the heuristic and the two baselines are
compared on the same instance.

Run: python demos/03_placement.py
"""
# %%
from fogplace.placement import NodeState, build_instance, solve_exact, solve_heuristic, verify
from fogplace.simulate import node_capacities, strategy_da, strategy_qoeap
from fogplace.topology import assign_resources, build_hierarchy, random_stations
from fogplace.workload import DemandSnapshot

topo = assign_resources(build_hierarchy(random_stations(8, seed=5, width_m=6000), mu=2, seed=5), seed=5)
caps = node_capacities(topo, scale=0.015)
state = {n: NodeState(caps[n]) for n in topo.nodes}
snap = DemandSnapshot(0, {s: 120.0 + 45 * (s % 3) for s in topo.stations})
inst = build_instance(topo, snap, state)
print(f"{inst.n_facilities} candidate nodes, {len(inst.demands)} demands, total {snap.total:.0f} units")

# %%
solutions = {
    "exact": solve_exact(inst, max_facilities=inst.n_facilities),
    "heuristic": solve_heuristic(inst, seed=5),
    "DA": strategy_da(inst, topo),
    "QoEAP": strategy_qoeap(inst, topo),
}
for name, sol in solutions.items():
    tiers = sorted(topo.nodes[n].tier for n in sol.open_nodes)
    print(f"{name:>9}: objective {sol.objective:9.2f}  open tiers {tiers}  "
          f"unmet {sol.total_unmet:.1f}  feasible {verify(inst, sol).feasible}")
