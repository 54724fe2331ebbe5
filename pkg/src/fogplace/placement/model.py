"""Capacitated facility-location instances, solutions, objective and verification."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import FormatError, InvalidInputError
from ..topology import LatencyTable, Topology, latency
from ..workload import DemandSnapshot

DEFAULT_LATENCY_CAP_MS = 100.0
INSTANCE_SCHEMA = "fogplace.instance/1"
SOLUTION_SCHEMA = "fogplace.solution/1"

OPTIMAL = "optimal"
HEURISTIC = "feasible-heuristic"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Demand:
    region_id: int
    service_id: int
    volume: float


@dataclass
class NodeState:
    """Capacity bookkeeping for one node within a slot."""
    capacity: float
    used: float = 0.0
    reserved: float = 0.0

    @property
    def free(self) -> float:
        return max(self.capacity - self.used - self.reserved, 0.0)

    @property
    def load_fraction(self) -> float:
        if self.capacity <= 0:
            return 1.0
        return min((self.used + self.reserved) / self.capacity, 1.0)


@dataclass
class PlacementInstance:
    t: int
    facility_ids: list[int]
    capacity: np.ndarray  # (F,)
    open_cost: np.ndarray  # (F,)
    demands: list[Demand]
    latency: np.ndarray  # (F, D) ms
    latency_cap: float = DEFAULT_LATENCY_CAP_MS
    facility_weight: float = 1.0  # lambda on the opening term

    def __post_init__(self):
        self.capacity = np.asarray(self.capacity, dtype=float).reshape(-1)
        self.open_cost = np.asarray(self.open_cost, dtype=float).reshape(-1)
        F, D = len(self.facility_ids), len(self.demands)
        self.latency = np.asarray(self.latency, dtype=float).reshape(F, D)
        if self.capacity.shape != (F,) or self.open_cost.shape != (F,):
            raise InvalidInputError("capacity and open_cost must have one entry per facility")
        if np.any(self.capacity <= 0):
            raise InvalidInputError("facility capacities must be > 0")
        if np.any(self.open_cost < 0) or self.facility_weight < 0:
            raise InvalidInputError("open costs must be >= 0")
        if any(d.volume <= 0 for d in self.demands):
            raise InvalidInputError("demand volumes must be > 0")
        if len(set(self.facility_ids)) != F:
            raise InvalidInputError("duplicate facility ids")
        if np.any(np.isnan(self.latency)):
            raise InvalidInputError("latency matrix must be total")

    @property
    def n_facilities(self) -> int:
        return len(self.facility_ids)

    @property
    def n_demands(self) -> int:
        return len(self.demands)

    @property
    def volumes(self) -> np.ndarray:
        return np.array([d.volume for d in self.demands], dtype=float)

    @property
    def services(self) -> list[int]:
        return sorted({d.service_id for d in self.demands})

    @property
    def admissible(self) -> np.ndarray:
        """(F, D) mask of arcs within the latency cap."""
        return np.isfinite(self.latency) & (self.latency <= self.latency_cap)

    def sites(self) -> list[tuple[int, int]]:
        """(facility index, service) pairs that could serve something; ordered by facility id then service."""
        adm = self.admissible
        out = set()
        for k, d in enumerate(self.demands):
            for f in np.flatnonzero(adm[:, k]):
                out.add((int(f), d.service_id))
        return sorted(out, key=lambda s: (self.facility_ids[s[0]], s[1]))

    def usable_arcs(self, open_sites) -> np.ndarray:
        """(D, F) mask of arcs allowed by the open (facility index, service) flags."""
        adm = self.admissible.T
        mask = np.zeros_like(adm)
        service = np.array([d.service_id for d in self.demands])
        for f, s in open_sites:
            mask[:, f] |= service == s
        return mask & adm

    @property
    def admissible_capacity(self) -> float:
        reach = self.admissible.any(axis=1)
        return float(self.capacity[reach].sum())

    @property
    def capacity_infeasible(self) -> bool:
        """True if the demand cannot be covered even with every facility open."""
        from .flow import transport
        all_sites = self.sites()
        r = transport(self.latency.T, self.usable_arcs(all_sites), self.volumes, self.capacity)
        return r.total_unmet > 1e-9 * max(1.0, float(self.volumes.sum()))


@dataclass
class PlacementSolution:
    open: frozenset  # of (facility_id, service_id)
    assignment: dict  # (facility_id, demand index) -> volume
    objective: float
    status: str
    unmet: dict = field(default_factory=dict)  # demand index -> uncovered volume
    solver: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def open_nodes(self) -> set[int]:
        return {f for f, _ in self.open}

    @property
    def total_unmet(self) -> float:
        return float(sum(self.unmet.values()))

    def node_load(self) -> dict[int, float]:
        load: dict[int, float] = {}
        for (f, _), v in self.assignment.items():
            load[f] = load.get(f, 0.0) + v
        return load


def solution_from_flow(inst: PlacementInstance, open_sites, x: np.ndarray, status: str, solver: str,
                       drop_idle: bool = True, diagnostics: dict | None = None) -> PlacementSolution:
    """Wrap a (D, F) flow matrix. Sites that carry no flow are closed when ``drop_idle``."""
    assignment = {}
    used_sites = set()
    for k, f in zip(*np.nonzero(x > 0)):
        fid = inst.facility_ids[f]
        assignment[(fid, int(k))] = float(x[k, f])
        used_sites.add((int(f), inst.demands[k].service_id))
    sites = used_sites if drop_idle else set(open_sites)
    opened = frozenset((inst.facility_ids[f], s) for f, s in sites)
    served = x.sum(axis=1)
    vol = inst.volumes
    tol = 1e-9 * max(1.0, float(vol.sum()))
    unmet = {k: float(vol[k] - served[k]) for k in range(inst.n_demands) if vol[k] - served[k] > tol}
    sol = PlacementSolution(opened, assignment, 0.0, status, unmet, solver, diagnostics or {})
    sol.objective = objective(inst, sol)
    return sol


def objective(inst: PlacementInstance, sol: PlacementSolution) -> float:
    """lambda * sum of open costs over open (node, service) flags + sum of latency * volume."""
    index = {fid: i for i, fid in enumerate(inst.facility_ids)}
    total = inst.facility_weight * sum(float(inst.open_cost[index[f]]) for f, _ in sol.open if f in index)
    for (f, k), v in sol.assignment.items():
        total += float(inst.latency[index[f], k]) * v
    return float(total)


@dataclass
class VerifyReport:
    feasible: bool
    violations: list[str]


def verify(inst: PlacementInstance, sol: PlacementSolution, rel_tol: float = 1e-9,
           allow_unmet: bool | None = None) -> VerifyReport:
    """List every broken constraint; never raises on a bad solution.

    Demand balance requires full coverage, except that volume the solution
    declares in ``unmet`` is tolerated when the status is infeasible (or when
    ``allow_unmet`` says so).
    """
    v: list[str] = []
    index = {fid: i for i, fid in enumerate(inst.facility_ids)}
    vol = inst.volumes
    if allow_unmet is None:
        allow_unmet = sol.status == INFEASIBLE
    served = np.zeros(inst.n_demands)
    load = np.zeros(inst.n_facilities)
    adm = inst.admissible
    for key, x in sol.assignment.items():
        try:
            f, k = key
        except (TypeError, ValueError):
            v.append(f"malformed assignment key {key!r}")
            continue
        if f not in index or not (0 <= k < inst.n_demands):
            v.append(f"assignment to unknown facility/demand {key!r}")
            continue
        if not np.isfinite(x):
            v.append(f"non-finite assignment x[{f},{k}]")
            continue
        if x < 0:
            v.append(f"negative assignment x[{f},{k}] = {x}")
        i = index[f]
        served[k] += x
        load[i] += x
        if x > 0 and (f, inst.demands[k].service_id) not in sol.open:
            v.append(f"capacity: demand {k} assigned to closed facility {f}")
        if x > 0 and not adm[i, k]:
            v.append(f"inadmissible arc: facility {f} -> demand {k} exceeds {inst.latency_cap} ms")
    for item in sol.open:
        if not (isinstance(item, tuple) and len(item) == 2 and item[0] in index):
            v.append(f"open flag {item!r} is not a (facility, service) pair of this instance")
    for k in range(inst.n_demands):
        declared = sol.unmet.get(k, 0.0) if allow_unmet else 0.0
        gap = vol[k] - served[k] - declared
        if abs(gap) > rel_tol * max(vol[k], 1.0):
            if served[k] > vol[k] * (1 + rel_tol):
                v.append(f"demand balance: demand {k} over-served ({served[k]} > {vol[k]})")
            else:
                v.append(f"demand balance: demand {k} served {served[k]} of {vol[k]}")
    for i, fid in enumerate(inst.facility_ids):
        if load[i] > inst.capacity[i] * (1 + rel_tol) + rel_tol:
            v.append(f"capacity: facility {fid} load {load[i]} > {inst.capacity[i]}")
    return VerifyReport(not v, v)


def build_instance(topo: Topology, snapshot: DemandSnapshot | Sequence[DemandSnapshot],
                   node_state: Mapping[int, NodeState], latency_cap: float = DEFAULT_LATENCY_CAP_MS,
                   open_cost: float | Mapping[int, float] = 1.0, facility_weight: float = 1.0,
                   t: int | None = None, table: LatencyTable | None = None) -> PlacementInstance:
    """One facility per node with free capacity; latency under the node's current load.

    ``table`` (from ``latency_table``) gives the same numbers without walking
    tree paths, which matters when instances are built every slot.
    """
    snaps = [snapshot] if isinstance(snapshot, DemandSnapshot) else list(snapshot)
    demands = [Demand(r, s.service_id, float(vol)) for s in snaps for r, vol in sorted(s.demands.items()) if vol > 0]
    if not demands:
        raise InvalidInputError("snapshot has no demand")
    unknown = sorted(n for n in node_state if n not in topo.nodes)
    if unknown:
        raise InvalidInputError(f"node_state refers to unknown nodes {unknown[:5]}")
    fids = [n for n in sorted(node_state) if node_state[n].free > 0]
    if table is not None:
        lat = table.matrix(fids, [d.region_id for d in demands], [node_state[n].load_fraction for n in fids])
    else:
        lat = np.array([[latency(topo, n, d.region_id, node_state[n].load_fraction) for d in demands]
                        for n in fids], dtype=float).reshape(len(fids), len(demands))
    if isinstance(open_cost, Mapping):
        oc = [float(open_cost.get(n, 1.0)) for n in fids]
    else:
        oc = [float(open_cost)] * len(fids)
    return PlacementInstance(snaps[0].time if t is None else t, fids, [node_state[n].free for n in fids], oc,
                             demands, lat, latency_cap, facility_weight)


# -- serialization -----------------------------------------------------------------

def _finite_or_none(v: float):
    return float(v) if np.isfinite(v) else None


def instance_to_dict(inst: PlacementInstance) -> dict:
    return {
        "schema": INSTANCE_SCHEMA,
        "t": inst.t,
        "latency_cap": inst.latency_cap,
        "facility_weight": inst.facility_weight,
        "facilities": [{"id": f, "capacity": float(c), "open_cost": float(o)}
                       for f, c, o in zip(inst.facility_ids, inst.capacity, inst.open_cost)],
        "demands": [{"region": d.region_id, "service": d.service_id, "volume": d.volume} for d in inst.demands],
        "latency": [[_finite_or_none(v) for v in row] for row in inst.latency],
    }


def instance_from_dict(doc: dict) -> PlacementInstance:
    if doc.get("schema") != INSTANCE_SCHEMA:
        raise FormatError(f"unsupported instance schema {doc.get('schema')!r}")
    fac = doc["facilities"]
    lat = np.array([[np.inf if v is None else v for v in row] for row in doc["latency"]], dtype=float)
    return PlacementInstance(doc["t"], [f["id"] for f in fac], [f["capacity"] for f in fac],
                             [f["open_cost"] for f in fac],
                             [Demand(d["region"], d["service"], d["volume"]) for d in doc["demands"]],
                             lat.reshape(len(fac), len(doc["demands"])), doc["latency_cap"],
                             doc.get("facility_weight", 1.0))


def solution_to_dict(sol: PlacementSolution) -> dict:
    return {
        "schema": SOLUTION_SCHEMA,
        "status": sol.status,
        "solver": sol.solver,
        "objective": sol.objective,
        "open": sorted([list(p) for p in sol.open]),
        "assignment": [{"facility": f, "demand": k, "volume": v} for (f, k), v in sorted(sol.assignment.items())],
        "unmet": [{"demand": k, "volume": v} for k, v in sorted(sol.unmet.items())],
    }


def solution_from_dict(doc: dict) -> PlacementSolution:
    if doc.get("schema") != SOLUTION_SCHEMA:
        raise FormatError(f"unsupported solution schema {doc.get('schema')!r}")
    return PlacementSolution(frozenset(tuple(p) for p in doc["open"]),
                             {(a["facility"], a["demand"]): a["volume"] for a in doc["assignment"]},
                             doc["objective"], doc["status"], {u["demand"]: u["volume"] for u in doc["unmet"]},
                             doc.get("solver", ""))


def dumps(obj) -> str:
    if isinstance(obj, PlacementInstance):
        return json.dumps(instance_to_dict(obj), sort_keys=True) + "\n"
    if isinstance(obj, PlacementSolution):
        return json.dumps(solution_to_dict(obj), sort_keys=True) + "\n"
    raise TypeError(f"cannot serialise {type(obj).__name__}")
