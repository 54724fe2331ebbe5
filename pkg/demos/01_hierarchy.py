"""Building the cloud-fog tree over a station layout.

Stations closer than the radius are linked, Louvain groups them into
cloudlets, and the grouping repeats on the cloudlet graph until at most
``mu`` nodes remain under the cloud.

Run: python demos/01_hierarchy.py
"""
# %%
from collections import Counter

from fogplace.topology import (assign_resources, build_hierarchy, build_proximity_graph, check_topology,
                               clustered_stations, detect_communities, latency)

stations = clustered_stations(120, clusters=5, seed=11, width_m=25_000)
graph = build_proximity_graph(stations, radius_m=3000)
print(f"{graph.number_of_nodes()} stations, {graph.number_of_edges()} links within 3 km")

# %% The first grouping step on its own
communities = detect_communities(graph, seed=11)
print("first-tier community sizes:", sorted(map(len, communities), reverse=True)[:10], "...")

# %% The full tree for a few values of mu
for mu in (1, 2, 3):
    topo = build_hierarchy(stations, radius_m=3000, mu=mu, seed=11)
    print(f"mu={mu}: tier sizes {topo.tier_sizes()}, problems {check_topology(topo)}")

# %% Resources and latency on the default tree
topo = assign_resources(build_hierarchy(stations, radius_m=3000, mu=2, seed=11), seed=11)
print("tier of each node:", dict(sorted(Counter(n.tier for n in topo.nodes.values()).items())))
station = topo.stations[0]
for node in topo.ancestors(station):
    res = topo.nodes[node].resources
    print(f"  node {node:4d} tier {topo.nodes[node].tier}: mips {res.mips:8.2f}  "
          f"latency idle {latency(topo, node, station):6.2f} ms, loaded {latency(topo, node, station, 0.9):6.2f} ms")
