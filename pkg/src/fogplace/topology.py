"""Hierarchical Cloud-Fog topology built bottom-up from base-station locations.

Stations are linked when they lie within a connection radius, grouped with
Louvain community detection, and every group gets an upper-tier node. Upper
tiers are grouped again until at most ``mu`` nodes remain, and a single cloud
root closes the tree.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, asdict
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import ConfigurationError, FormatError, InvalidInputError, UnknownEntityError

TOPOLOGY_SCHEMA = "fogplace.topology/1"

RESOURCE_FIELDS = ("mips", "storage_gb", "ram_gb", "up_mbps", "down_mbps")

# Columns of the per-tier resource table, from the access tier up to the cloud.
TABLE_TIER_RANGES = (
    {"mips": (2.8, 5.3), "storage_gb": (100.0**2,) * 2, "ram_gb": (25.0, 25.0),
     "up_mbps": (300.0, 300.0), "down_mbps": (300.0, 300.0)},
    {"mips": (5.3, 7.8), "storage_gb": (200.0**2,) * 2, "ram_gb": (40.0, 40.0),
     "up_mbps": (500.0, 500.0), "down_mbps": (500.0, 500.0)},
    {"mips": (7.8, 10.2), "storage_gb": (400.0**2,) * 2, "ram_gb": (60.0, 60.0),
     "up_mbps": (800.0, 800.0), "down_mbps": (800.0, 800.0)},
    {"mips": (10.2, 20.5), "storage_gb": (1000.0**2,) * 2, "ram_gb": (100.0, 100.0),
     "up_mbps": (2000.0, 2000.0), "down_mbps": (2000.0, 2000.0)},
)

# Propagation latency per tier boundary; the last entry is the hop into the root.
DEFAULT_HOP_LATENCY_MS = (2.0, 8.0, 20.0, 45.0)
# Base processing latency per tier; the last entry is the root's.
DEFAULT_PROCESSING_MS = (3.0, 6.0, 12.0, 35.0)
DEFAULT_LOAD_PENALTY = 0.5


@dataclass(frozen=True)
class BaseStation:
    id: int
    x: float
    y: float
    coverage_radius: float = 1500.0

    def __post_init__(self):
        if not self.coverage_radius > 0:
            raise InvalidInputError(f"station {self.id}: coverage_radius must be > 0")


@dataclass(frozen=True)
class NodeResources:
    mips: float
    storage_gb: float
    ram_gb: float
    up_mbps: float
    down_mbps: float

    def __post_init__(self):
        for name in RESOURCE_FIELDS:
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"resource {name} must be > 0")


@dataclass
class FogNode:
    id: int
    tier: int
    position: tuple[float, float]
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    resources: NodeResources | None = None
    label: str = ""


@dataclass
class Topology:
    nodes: dict[int, FogNode]
    tier_count: int
    hop_latency_ms: tuple[float, ...] = DEFAULT_HOP_LATENCY_MS
    processing_ms: tuple[float, ...] = DEFAULT_PROCESSING_MS
    load_penalty: float = DEFAULT_LOAD_PENALTY
    config: dict = field(default_factory=dict)

    @property
    def root(self) -> int:
        roots = [n.id for n in self.nodes.values() if n.parent is None]
        if len(roots) != 1:
            raise InvalidInputError(f"topology has {len(roots)} roots")
        return roots[0]

    def tier(self, k: int) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.tier == k)

    @property
    def stations(self) -> list[int]:
        return self.tier(0)

    def tier_sizes(self) -> list[int]:
        return [len(self.tier(k)) for k in range(self.tier_count)]

    def node(self, node_id: int) -> FogNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownEntityError(f"unknown node {node_id}") from None

    def ancestors(self, node_id: int) -> list[int]:
        """Path from ``node_id`` (inclusive) up to the root."""
        path = [node_id]
        while self.nodes[path[-1]].parent is not None:
            path.append(self.nodes[path[-1]].parent)
        return path

    def path(self, a: int, b: int) -> list[int]:
        """Tree path between two nodes, endpoints included."""
        up_a = self.ancestors(self.node(a).id)
        up_b = self.ancestors(self.node(b).id)
        on_b = set(up_b)
        lca = next(n for n in up_a if n in on_b)
        head = up_a[: up_a.index(lca) + 1]
        tail = up_b[: up_b.index(lca)]
        return head + tail[::-1]

    def hops(self, a: int, b: int) -> int:
        return len(self.path(a, b)) - 1

    def descendant_stations(self, node_id: int) -> list[int]:
        out, stack = [], [node_id]
        while stack:
            n = self.nodes[stack.pop()]
            if n.tier == 0:
                out.append(n.id)
            stack.extend(n.children)
        return sorted(out)

    def hop_latency(self, lower_tier: int) -> float:
        """Latency of the link between ``lower_tier`` and ``lower_tier + 1``."""
        table = self.hop_latency_ms
        if lower_tier + 1 == self.tier_count - 1:
            return table[-1]
        return table[min(lower_tier, len(table) - 2)] if len(table) > 1 else table[0]

    def processing_latency(self, tier: int) -> float:
        table = self.processing_ms
        if tier == self.tier_count - 1:
            return table[-1]
        return table[min(tier, len(table) - 2)] if len(table) > 1 else table[0]


def _distance(a: BaseStation, b: BaseStation) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def build_proximity_graph(stations: Sequence[BaseStation], radius_m: float) -> nx.Graph:
    """Undirected graph linking stations at Euclidean distance <= ``radius_m``."""
    if not stations:
        raise InvalidInputError("station list is empty")
    if not radius_m > 0:
        raise InvalidInputError("radius_m must be > 0")
    ids = [s.id for s in stations]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("station ids must be unique")
    g = nx.Graph()
    g.add_nodes_from(ids)
    xy = np.array([(s.x, s.y) for s in stations], dtype=float)
    # Grid bucketing keeps this near-linear for large layouts.
    cells: dict[tuple[int, int], list[int]] = {}
    for i, (x, y) in enumerate(xy):
        cells.setdefault((int(x // radius_m), int(y // radius_m)), []).append(i)
    for (cx, cy), members in cells.items():
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                other = cells.get((cx + dx, cy + dy))
                if not other:
                    continue
                for i in members:
                    for j in other:
                        if j <= i:
                            continue
                        if math.hypot(xy[i, 0] - xy[j, 0], xy[i, 1] - xy[j, 1]) <= radius_m:
                            g.add_edge(ids[i], ids[j])
    return g


def modularity(graph: nx.Graph, communities: Iterable[Iterable[int]], weight: str = "weight") -> float:
    """Newman modularity; 0.0 for a graph without edges."""
    if graph.size(weight=weight) == 0:
        return 0.0
    return nx.community.modularity(graph, [set(c) for c in communities], weight=weight)


def _canonical(communities: Iterable[Iterable[int]]) -> list[list[int]]:
    return sorted((sorted(c) for c in communities), key=lambda c: c[0])


def detect_communities(graph: nx.Graph, seed: int = 0, weight: str = "weight") -> list[list[int]]:
    """Louvain partition of ``graph``, canonically ordered by smallest member id."""
    if graph.number_of_nodes() == 0:
        raise InvalidInputError("graph is empty")
    if graph.number_of_edges() == 0:
        return [[v] for v in sorted(graph.nodes)]
    comms = nx.community.louvain_communities(graph, weight=weight, seed=seed)
    return _canonical(comms)


def _link_components(graph: nx.Graph, positions: Mapping[int, tuple[float, float]]) -> nx.Graph:
    """Copy of ``graph`` with each component tied to its geographically nearest other component."""
    g = graph.copy()
    while True:
        comps = [sorted(c) for c in nx.connected_components(g)]
        if len(comps) <= 1:
            return g
        comps.sort(key=lambda c: c[0])
        first = comps[0]
        best = None
        for comp in comps[1:]:
            for a in first:
                for b in comp:
                    d = math.dist(positions[a], positions[b])
                    key = (d, a, b)
                    if best is None or key < best:
                        best = key
        _, a, b = best
        g.add_edge(a, b, weight=1.0)


def _grouping(graph: nx.Graph, positions: Mapping[int, tuple[float, float]], seed: int) -> list[list[int]]:
    """Communities that strictly reduce the node count (needed for termination)."""
    n = graph.number_of_nodes()
    comms = detect_communities(graph, seed)
    if len(comms) < n or n == 1:
        return comms
    comms = detect_communities(_link_components(graph, positions), seed)
    if len(comms) < n:
        return comms
    # Last resort: merge the two closest nodes.
    ids = sorted(graph.nodes)
    _, a, b = min((math.dist(positions[a], positions[b]), a, b) for a, b in combinations(ids, 2))
    merged = [[a, b]] + [[v] for v in ids if v not in (a, b)]
    return _canonical(merged)


def _centroid(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    arr = np.asarray(points, dtype=float)
    return float(arr[:, 0].mean()), float(arr[:, 1].mean())


_TIER_LABELS = ("BS", "CL", "RC")


def build_hierarchy(stations: Sequence[BaseStation], radius_m: float = 3000.0, mu: int = 2,
                    seed: int = 0, **latency_config) -> Topology:
    """Build the Cloud-Fog tree over ``stations``.

    Upper-tier grouping runs Louvain on the graph of current-tier nodes whose
    edge weights count the station links crossing between their regions. A tier
    that shrinks to one node becomes the root; otherwise a root is added once
    the tier holds at most ``mu`` nodes.
    """
    if mu < 1:
        raise InvalidInputError("mu must be >= 1")
    if not stations:
        raise InvalidInputError("station list is empty")
    base = build_proximity_graph(stations, radius_m)
    nodes: dict[int, FogNode] = {
        s.id: FogNode(id=s.id, tier=0, position=(float(s.x), float(s.y)), label=f"BS{s.id}")
        for s in stations
    }
    next_id = max(nodes) + 1
    positions = {i: n.position for i, n in nodes.items()}

    def add_level(groups: list[list[int]], tier: int) -> list[int]:
        nonlocal next_id
        created = []
        for k, members in enumerate(groups, start=1):
            prefix = _TIER_LABELS[tier] if tier < len(_TIER_LABELS) else f"T{tier}-"
            node = FogNode(id=next_id, tier=tier, children=list(members),
                           position=_centroid([nodes[m].position for m in members]),
                           label=f"{prefix}{k}")
            for m in members:
                nodes[m].parent = node.id
            nodes[node.id] = node
            positions[node.id] = node.position
            created.append(node.id)
            next_id += 1
        return created

    current = add_level(_grouping(base, positions, seed), 1)
    tier = 1
    while len(current) > 1:
        if len(current) <= mu:
            current = add_level([current], tier + 1)
            tier += 1
            break
        # Region graph: current-tier nodes weighted by station links between their regions.
        region_of = {}
        for nid in current:
            stack = [nid]
            while stack:
                n = nodes[stack.pop()]
                if n.tier == 0:
                    region_of[n.id] = nid
                stack.extend(n.children)
        g = nx.Graph()
        g.add_nodes_from(current)
        for a, b in base.edges:
            ra, rb = region_of[a], region_of[b]
            if ra != rb:
                w = g.get_edge_data(ra, rb, {"weight": 0.0})["weight"]
                g.add_edge(ra, rb, weight=w + 1.0)
        current = add_level(_grouping(g, positions, seed), tier + 1)
        tier += 1
    root = nodes[current[0]]
    root.label = "CLOUD"
    topo = Topology(nodes=nodes, tier_count=tier + 1,
                    config={"radius_m": radius_m, "mu": mu, "seed": seed})
    for key, value in latency_config.items():
        if not hasattr(topo, key):
            raise ConfigurationError(f"unknown latency setting {key!r}")
        setattr(topo, key, tuple(value) if isinstance(value, (list, tuple)) else value)
    return topo


def check_topology(topo: Topology) -> list[str]:
    """Return a list of invariant violations (empty when the tree is well formed)."""
    problems = []
    roots = [n.id for n in topo.nodes.values() if n.parent is None]
    if len(roots) != 1:
        problems.append(f"expected one root, found {len(roots)}")
    if topo.tier_count < 2:
        problems.append("tier_count < 2")
    for n in topo.nodes.values():
        if n.parent is not None:
            p = topo.nodes.get(n.parent)
            if p is None:
                problems.append(f"node {n.id}: missing parent {n.parent}")
                continue
            if p.tier != n.tier + 1:
                problems.append(f"node {n.id}: parent tier {p.tier} != {n.tier + 1}")
            if n.id not in p.children:
                problems.append(f"node {n.id}: not listed among parent's children")
        for c in n.children:
            if topo.nodes[c].tier != n.tier - 1:
                problems.append(f"node {n.id}: child {c} has tier {topo.nodes[c].tier}")
    if len(roots) == 1:
        root = roots[0]
        if topo.nodes[root].tier != topo.tier_count - 1:
            problems.append("root is not on the top tier")
        for s in topo.stations:
            seen = set()
            cur = s
            while topo.nodes[cur].parent is not None and cur not in seen:
                seen.add(cur)
                cur = topo.nodes[cur].parent
            if cur != root:
                problems.append(f"station {s} does not reach the root")
    sizes = topo.tier_sizes()
    # A lone station still gets a cloud above it, so [1, 1] is allowed.
    if sizes != [1, 1] and any(b >= a for a, b in zip(sizes, sizes[1:])):
        problems.append(f"tier sizes not strictly decreasing: {sizes}")
    return problems


def default_tier_ranges(tier_count: int) -> dict[int, dict[str, tuple[float, float]]]:
    """Map topology tiers onto the four-column resource table.

    Tier 0 takes the access column and the root the cloud column; intermediate
    tiers take the cloudlet and regional columns, repeating the regional one
    for very deep trees.
    """
    if tier_count < 2:
        raise ConfigurationError("tier_count must be >= 2")
    cols = {0: 0, tier_count - 1: 3}
    for t in range(1, tier_count - 1):
        cols[t] = 1 if t == 1 else 2
    return {t: dict(TABLE_TIER_RANGES[c]) for t, c in cols.items()}


def assign_resources(topo: Topology, tier_ranges: Mapping[int, Mapping[str, tuple[float, float]]] | None = None,
                     seed: int = 0) -> Topology:
    """Draw every node's resources uniformly from its tier's ranges (in place)."""
    if tier_ranges is None:
        tier_ranges = default_tier_ranges(topo.tier_count)
    rng = np.random.default_rng(seed)
    for nid in sorted(topo.nodes):
        node = topo.nodes[nid]
        ranges = tier_ranges.get(node.tier)
        if ranges is None:
            raise ConfigurationError(f"no resource range for tier {node.tier}")
        values = {}
        for name in RESOURCE_FIELDS:
            if name not in ranges:
                raise ConfigurationError(f"tier {node.tier}: missing range for {name}")
            lo, hi = ranges[name]
            if hi < lo:
                raise ConfigurationError(f"tier {node.tier}: empty range for {name}")
            u = rng.random()
            values[name] = float(lo) if lo == hi else float(lo + (hi - lo) * u)
        node.resources = NodeResources(**values)
    topo.config["resource_seed"] = seed
    return topo


def latency(topo: Topology, node_id: int, region_id: int, load_fraction: float = 0.0) -> float:
    """Milliseconds for a region's demand served at ``node_id``.

    A region is served by the base station with the same id. The value is the
    sum of link latencies along the tree path plus the node's processing latency
    inflated by its load.
    """
    node = topo.node(node_id)
    station = topo.nodes.get(region_id)
    if station is None or station.tier != 0:
        raise UnknownEntityError(f"unknown region {region_id}")
    if not 0.0 <= load_fraction <= 1.0:
        raise InvalidInputError("load_fraction must lie in [0, 1]")
    path = topo.path(region_id, node_id)
    total = 0.0
    for a, b in zip(path, path[1:]):
        total += topo.hop_latency(min(topo.nodes[a].tier, topo.nodes[b].tier))
    total += topo.processing_latency(node.tier) * (1.0 + topo.load_penalty * load_fraction)
    return total


@dataclass
class LatencyTable:
    """Static link latency and hop counts for every (node, region) pair."""
    node_ids: list[int]
    region_ids: list[int]
    link_ms: np.ndarray  # (nodes, regions), path link latency only
    hops: np.ndarray  # (nodes, regions)
    processing_ms: np.ndarray  # (nodes,)
    load_penalty: float

    def __post_init__(self):
        self.node_pos = {n: i for i, n in enumerate(self.node_ids)}
        self.region_pos = {r: j for j, r in enumerate(self.region_ids)}

    def latency(self, node_id: int, region_id: int, load_fraction: float = 0.0) -> float:
        i, j = self.node_pos[node_id], self.region_pos[region_id]
        return float(self.link_ms[i, j] + self.processing_ms[i] * (1.0 + self.load_penalty * load_fraction))

    def matrix(self, node_ids, region_ids, load_fraction) -> np.ndarray:
        """(len(node_ids), len(region_ids)) latencies; ``load_fraction`` is per node."""
        ii = [self.node_pos[n] for n in node_ids]
        jj = [self.region_pos[r] for r in region_ids]
        proc = self.processing_ms[ii] * (1.0 + self.load_penalty * np.asarray(load_fraction, dtype=float))
        return self.link_ms[np.ix_(ii, jj)] + proc[:, None]


def latency_table(topo: Topology) -> LatencyTable:
    nodes = sorted(topo.nodes)
    regions = topo.stations
    link = np.zeros((len(nodes), len(regions)))
    hops = np.zeros((len(nodes), len(regions)), dtype=int)
    for i, n in enumerate(nodes):
        for j, r in enumerate(regions):
            path = topo.path(r, n)
            hops[i, j] = len(path) - 1
            link[i, j] = sum(topo.hop_latency(min(topo.nodes[a].tier, topo.nodes[b].tier))
                             for a, b in zip(path, path[1:]))
    proc = np.array([topo.processing_latency(topo.nodes[n].tier) for n in nodes])
    return LatencyTable(nodes, regions, link, hops, proc, topo.load_penalty)


# --- station CSV input -------------------------------------------------------

_EARTH_RADIUS_M = 6_371_000.0


def project_latlon(lat: np.ndarray, lon: np.ndarray, lat0: float | None = None,
                   lon0: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Local equirectangular projection to meters around (lat0, lon0)."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    lat0 = float(lat.mean()) if lat0 is None else lat0
    lon0 = float(lon.mean()) if lon0 is None else lon0
    x = np.radians(lon - lon0) * _EARTH_RADIUS_M * math.cos(math.radians(lat0))
    y = np.radians(lat - lat0) * _EARTH_RADIUS_M
    return x, y


def read_stations_csv(text: str, latlon: bool = False) -> list[BaseStation]:
    """Parse ``id,x_m,y_m,coverage_radius_m`` (or ``id,lat,lon,coverage_radius_m``)."""
    reader = csv.DictReader(io.StringIO(text))
    cols = ("id", "lat", "lon", "coverage_radius_m") if latlon else ("id", "x_m", "y_m", "coverage_radius_m")
    if reader.fieldnames is None or any(c not in reader.fieldnames for c in cols):
        raise FormatError(f"station CSV header must contain {','.join(cols)}")
    rows = list(reader)
    if not rows:
        raise InvalidInputError("station CSV has no rows")
    try:
        ids = [int(r["id"]) for r in rows]
        a = np.array([float(r[cols[1]]) for r in rows])
        b = np.array([float(r[cols[2]]) for r in rows])
        radius = [float(r["coverage_radius_m"]) for r in rows]
    except ValueError as exc:
        raise FormatError(f"bad station row: {exc}") from None
    if latlon:
        x, y = project_latlon(a, b)
    else:
        x, y = a, b
    if len(set(ids)) != len(ids):
        raise InvalidInputError("station ids must be unique")
    return [BaseStation(i, float(xi), float(yi), r) for i, xi, yi, r in zip(ids, x, y, radius)]


def write_stations_csv(stations: Sequence[BaseStation]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "x_m", "y_m", "coverage_radius_m"])
    for s in stations:
        w.writerow([s.id, repr(float(s.x)), repr(float(s.y)), repr(float(s.coverage_radius))])
    return buf.getvalue()


def random_stations(n: int, seed: int = 0, width_m: float = 10_000.0, height_m: float | None = None,
                    coverage_radius: float = 1500.0) -> list[BaseStation]:
    """Uniformly scattered synthetic stations (stand-in for a measured layout)."""
    rng = np.random.default_rng(seed)
    height_m = width_m if height_m is None else height_m
    xy = rng.random((n, 2)) * (width_m, height_m)
    return [BaseStation(i, float(x), float(y), coverage_radius) for i, (x, y) in enumerate(xy)]


def clustered_stations(n: int, clusters: int, seed: int = 0, width_m: float = 20_000.0,
                       spread_m: float = 1200.0, coverage_radius: float = 1500.0) -> list[BaseStation]:
    """Stations scattered around ``clusters`` town centres."""
    rng = np.random.default_rng(seed)
    centres = rng.random((clusters, 2)) * width_m
    which = np.arange(n) % clusters
    xy = centres[which] + rng.normal(0.0, spread_m, size=(n, 2))
    return [BaseStation(i, float(x), float(y), coverage_radius) for i, (x, y) in enumerate(xy)]


# --- JSON ----------------------------------------------------------------------

def topology_to_dict(topo: Topology) -> dict:
    return {
        "schema": TOPOLOGY_SCHEMA,
        "tier_count": topo.tier_count,
        "hop_latency_ms": list(topo.hop_latency_ms),
        "processing_ms": list(topo.processing_ms),
        "load_penalty": topo.load_penalty,
        "config": dict(sorted(topo.config.items())),
        "nodes": [
            {
                "id": n.id,
                "tier": n.tier,
                "label": n.label,
                "position": [n.position[0], n.position[1]],
                "parent": n.parent,
                "children": list(n.children),
                "resources": asdict(n.resources) if n.resources else None,
            }
            for n in (topo.nodes[i] for i in sorted(topo.nodes))
        ],
    }


def topology_from_dict(doc: dict) -> Topology:
    if doc.get("schema") != TOPOLOGY_SCHEMA:
        raise FormatError(f"unsupported topology schema {doc.get('schema')!r}")
    nodes = {}
    for d in doc["nodes"]:
        res = NodeResources(**d["resources"]) if d.get("resources") else None
        nodes[d["id"]] = FogNode(id=d["id"], tier=d["tier"], position=tuple(d["position"]),
                                 parent=d["parent"], children=list(d["children"]),
                                 resources=res, label=d.get("label", ""))
    return Topology(nodes=nodes, tier_count=doc["tier_count"],
                    hop_latency_ms=tuple(doc["hop_latency_ms"]),
                    processing_ms=tuple(doc["processing_ms"]),
                    load_penalty=doc["load_penalty"], config=dict(doc.get("config", {})))


def dumps_topology(topo: Topology) -> str:
    return json.dumps(topology_to_dict(topo), indent=2, sort_keys=True) + "\n"


def loads_topology(text: str) -> Topology:
    return topology_from_dict(json.loads(text))
