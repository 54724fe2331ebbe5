"""Forecast-driven reservation of node capacity for the next slot.

Nodes that serve multimedia now and are predicted to serve it in the next
slot (Y) keep the predicted volume reserved; Gamma adds the other predicted
nodes. Concurrent services that would land on a reserved node are moved to
the closest node outside Gamma that can take them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .placement.heuristic import solve
from .placement.model import DEFAULT_LATENCY_CAP_MS, NodeState, PlacementSolution, build_instance
from .topology import LatencyTable, Topology, latency
from .workload import DemandSnapshot

PLAN_SCHEMA = "fogplace.reservation/1"


@dataclass(frozen=True)
class ConcurrentService:
    """A non-multimedia service occupying ``volume`` at ``node`` for one slot."""
    service_id: int
    node: int
    volume: float
    region_id: int
    max_latency_ms: float = 200.0


@dataclass
class ReservationPlan:
    t_next: int
    Y: frozenset
    Gamma: frozenset
    reserved_capacity: dict[int, float] = field(default_factory=dict)
    migrations: list[tuple[int, int, int]] = field(default_factory=list)  # (service, from, to)

    def __post_init__(self):
        self.Y = frozenset(self.Y)
        self.Gamma = frozenset(self.Gamma)

    def problems(self) -> list[str]:
        out = []
        if not self.Y <= self.Gamma:
            out.append("Y is not a subset of Gamma")
        extra = set(self.reserved_capacity) - set(self.Y)
        if extra:
            out.append(f"reserved capacity on nodes outside Y: {sorted(extra)}")
        if any(v < 0 for v in self.reserved_capacity.values()):
            out.append("negative reservation")
        return out

    def to_dict(self) -> dict:
        return {
            "schema": PLAN_SCHEMA,
            "t_next": self.t_next,
            "Y": sorted(self.Y),
            "Gamma": sorted(self.Gamma),
            "reserved_capacity": {str(k): v for k, v in sorted(self.reserved_capacity.items())},
            "migrations": [list(m) for m in self.migrations],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReservationPlan":
        return cls(doc["t_next"], frozenset(doc["Y"]), frozenset(doc["Gamma"]),
                   {int(k): float(v) for k, v in doc["reserved_capacity"].items()},
                   [tuple(m) for m in doc["migrations"]])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"


def reserve(current: Iterable, predicted: Iterable) -> tuple[frozenset, frozenset]:
    """Y = current & predicted, Gamma = Y | predicted."""
    a, p = frozenset(current), frozenset(predicted)
    y = a & p
    return y, y | p


def predicted_solution(topo: Topology, forecast: DemandSnapshot, node_state: Mapping[int, NodeState],
                       latency_cap: float = DEFAULT_LATENCY_CAP_MS, max_facilities: int = 12,
                       max_demands: int = 15, seed: int = 0, table: LatencyTable | None = None,
                       initial=None) -> PlacementSolution | None:
    if not any(v > 0 for v in forecast.demands.values()):
        return None
    inst = build_instance(topo, forecast, node_state, latency_cap, table=table)
    return solve(inst, max_facilities, max_demands, seed, initial=initial)


def predicted_placement(topo: Topology, forecast: DemandSnapshot, node_state: Mapping[int, NodeState],
                        latency_cap: float = DEFAULT_LATENCY_CAP_MS, **solver) -> frozenset:
    """Open-node set of the placement solved on predicted demand."""
    sol = predicted_solution(topo, forecast, node_state, latency_cap, **solver)
    return frozenset() if sol is None else frozenset(sol.open_nodes)


def make_plan(t_next: int, current_nodes: Iterable, predicted: PlacementSolution | None) -> ReservationPlan:
    """Plan whose reservation on each Y node is its predicted assignment volume."""
    p_next = frozenset() if predicted is None else frozenset(predicted.open_nodes)
    y, gamma = reserve(current_nodes, p_next)
    need = {} if predicted is None else predicted.node_load()
    return ReservationPlan(t_next, y, gamma, {n: float(need.get(n, 0.0)) for n in sorted(y)})


@dataclass
class AdmissionResult:
    state: dict[int, NodeState]
    placed: dict[int, int]  # concurrent service id -> node
    rejected: dict[int, float] = field(default_factory=dict)  # service id -> volume not admitted
    migrations: list[tuple[int, int, int]] = field(default_factory=list)
    waivers: list[tuple[int, float, int]] = field(default_factory=list)  # (node, amount, service)
    audit: list[dict] = field(default_factory=list)


def _lat(topo: Topology, table: LatencyTable | None, node: int, region: int, load: float) -> float:
    if table is not None:
        return table.latency(node, region, load)
    return latency(topo, node, region, load)


def apply_reservation(node_state: Mapping[int, NodeState], plan: ReservationPlan | None,
                      concurrent: Sequence[ConcurrentService], topo: Topology,
                      table: LatencyTable | None = None) -> AdmissionResult:
    """Reserve capacity on Y nodes, then admit the concurrent services of the slot.

    With ``plan=None`` every concurrent service is admitted at its own node,
    which is the behaviour without forecasting. Returns a new state; the input
    mapping is not modified.
    """
    state = {n: NodeState(s.capacity, s.used, s.reserved) for n, s in node_state.items()}
    res = AdmissionResult(state, {})
    y = plan.Y if plan else frozenset()
    gamma = plan.Gamma if plan else frozenset()
    if plan:
        for n in sorted(plan.Y):
            want = plan.reserved_capacity.get(n, 0.0)
            got = min(want, state[n].free) if n in state else 0.0
            if n in state:
                state[n].reserved += got
            res.audit.append({"event": "reserve", "t": plan.t_next, "node": n, "requested": want, "reserved": got})
    for svc in sorted(concurrent, key=lambda c: c.service_id):
        home = svc.node
        if home in y:
            target, best = None, None
            for n in sorted(state):
                if n in gamma or state[n].free < svc.volume:
                    continue
                lat = _lat(topo, table, n, svc.region_id, state[n].load_fraction)
                if lat > svc.max_latency_ms:
                    continue
                if best is None or lat < best:
                    target, best = n, lat
            if target is not None:
                state[target].used += svc.volume
                res.placed[svc.service_id] = target
                res.migrations.append((svc.service_id, home, target))
                res.audit.append({"event": "migrate", "service": svc.service_id, "from": home, "to": target,
                                  "volume": svc.volume, "latency_ms": best})
                continue
            # no target: give up the conflicting part of the reservation
            conflict = svc.volume - state[home].free
            if conflict > 0:
                waived = min(conflict, state[home].reserved)
                state[home].reserved -= waived
                res.waivers.append((home, waived, svc.service_id))
                res.audit.append({"event": "waive", "service": svc.service_id, "node": home, "amount": waived})
        st = state.get(home)
        take = min(svc.volume, st.free) if st is not None else 0.0
        if st is not None:
            st.used += take
        res.placed[svc.service_id] = home
        if svc.volume - take > 1e-12:
            res.rejected[svc.service_id] = svc.volume - take
            res.audit.append({"event": "reject", "service": svc.service_id, "node": home,
                              "volume": svc.volume - take})
    if plan is not None:
        plan.migrations = list(res.migrations)
    return res
