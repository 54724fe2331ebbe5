"""Exact branch-and-bound over open (node, service) flags."""
from __future__ import annotations

import json
import logging
import time

import numpy as np

from ..errors import SolverSizeError
from .flow import transport_lists
from .model import INFEASIBLE, OPTIMAL, PlacementInstance, PlacementSolution, solution_from_flow

log = logging.getLogger("fogplace.placement")

DEFAULT_MAX_FACILITIES = 12
DEFAULT_MAX_DEMANDS = 15


class SiteModel:
    """Precomputed arc lists shared by the exact and heuristic solvers."""

    def __init__(self, inst: PlacementInstance):
        self.inst = inst
        self.sites = inst.sites()  # (facility index, service)
        self.volume = [float(v) for v in inst.volumes]
        self.capacity = [float(c) for c in inst.capacity]
        self.total = float(sum(self.volume))
        self.tol = 1e-9 * max(1.0, self.total)
        adm = inst.admissible
        self.site_cost = [inst.facility_weight * float(inst.open_cost[f]) for f, _ in self.sites]
        # arcs[j] = [(demand, latency)] for site j
        self.arcs: list[list[tuple[int, float]]] = []
        for f, s in self.sites:
            self.arcs.append([(k, float(inst.latency[f, k])) for k, d in enumerate(inst.demands)
                              if d.service_id == s and adm[f, k]])
        self.site_facility = [f for f, _ in self.sites]
        self._cache: dict[frozenset, tuple] = {}

    def adjacency(self, open_sites) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in self.volume]
        for j in sorted(open_sites):
            f = self.site_facility[j]
            for k, c in self.arcs[j]:
                adj[k].append((f, c))
        return adj

    def evaluate(self, open_sites: frozenset) -> tuple[float, float, list]:
        """(unmet volume, objective, flows) for an open set, memoised."""
        hit = self._cache.get(open_sites)
        if hit is not None:
            return hit
        flows, cost, unmet, _ = transport_lists(self.adjacency(open_sites), self.volume, self.capacity)
        u = sum(unmet)
        if u <= self.tol:
            u = 0.0
        obj = cost + sum(self.site_cost[j] for j in open_sites)
        out = (u, obj, flows)
        self._cache[open_sites] = out
        return out

    @property
    def evaluations(self) -> int:
        return len(self._cache)

    def flow_matrix(self, flows) -> np.ndarray:
        x = np.zeros((len(self.volume), self.inst.n_facilities))
        for k, row in enumerate(flows):
            for f, v in row.items():
                x[k, f] = v
        return x

    def open_tuple(self, open_sites) -> tuple:
        return tuple(sorted((self.inst.facility_ids[self.sites[j][0]], self.sites[j][1]) for j in open_sites))


def _log_solve(kind: str, inst: PlacementInstance, sol: PlacementSolution) -> None:
    if log.isEnabledFor(logging.INFO):
        rec = {"event": "solve", "solver": kind, "t": inst.t, "facilities": inst.n_facilities,
               "demands": inst.n_demands, "status": sol.status, "objective": sol.objective}
        rec.update(sol.diagnostics)
        log.info(json.dumps(rec, sort_keys=True))


def solve_exact(inst: PlacementInstance, max_facilities: int = DEFAULT_MAX_FACILITIES,
                max_demands: int = DEFAULT_MAX_DEMANDS, time_budget: float | None = None) -> PlacementSolution:
    """Optimal open set and assignment.

    Depth-first branch-and-bound over the (node, service) flags in id order,
    opening before closing. The bound at a node is the committed opening cost,
    plus every demand at its cheapest still-available arc (uncapacitated
    relaxation), plus the cheapest way to add enough extra facilities to cover
    the volume the committed ones cannot hold. Ties in the objective go to the
    lexicographically smallest open set.
    """
    if inst.n_facilities > max_facilities or inst.n_demands > max_demands:
        raise SolverSizeError(
            f"instance has {inst.n_facilities} facilities x {inst.n_demands} demands; exact limits are "
            f"{max_facilities} x {max_demands}, use solve_heuristic")
    t0 = time.perf_counter()
    if inst.n_demands == 0:
        return PlacementSolution(frozenset(), {}, 0.0, OPTIMAL, solver="exact",
                                 diagnostics={"nodes": 0, "bound_history": [], "wall_ms": 0.0})
    m = SiteModel(inst)
    n = len(m.sites)
    everything = frozenset(range(n))
    u_all, _, flows_all = m.evaluate(everything)
    if u_all > 0:
        diag = {"nodes": 0, "bound_history": [], "wall_ms": 1e3 * (time.perf_counter() - t0),
                "uncovered": u_all}
        sol = solution_from_flow(inst, [m.sites[j] for j in everything], m.flow_matrix(flows_all), INFEASIBLE,
                                 "exact", diagnostics=diag)
        _log_solve("exact", inst, sol)
        return sol

    D = len(m.volume)
    # per demand: arcs as (site, latency) for the bound
    demand_arcs: list[list[tuple[int, float]]] = [[] for _ in range(D)]
    for j, arcs in enumerate(m.arcs):
        for k, c in arcs:
            demand_arcs[k].append((j, c))
    fac_cap = m.capacity
    best_obj = np.inf
    best_key: tuple = ()
    best_open: frozenset = everything
    history: list[float] = []
    nodes = 0
    timed_out = False
    rel = 1e-12

    def bound(fixed_open: list[int], closed: set[int], depth: int) -> float:
        lb = sum(m.site_cost[j] for j in fixed_open)
        for k in range(D):
            c = min((c for j, c in demand_arcs[k] if j not in closed), default=np.inf)
            if c == np.inf:
                return np.inf
            lb += m.volume[k] * c
        have = {m.site_facility[j] for j in fixed_open}
        held = sum(fac_cap[f] for f in have)
        if held < m.total - m.tol:
            extra = {}
            for j in range(depth, n):
                f = m.site_facility[j]
                if f not in have:
                    extra[f] = min(extra.get(f, np.inf), m.site_cost[j])
            caps = sorted(((fac_cap[f], c) for f, c in extra.items()), reverse=True)
            need = m.total - held
            count = 0
            for cap, _ in caps:
                if need <= m.tol:
                    break
                need -= cap
                count += 1
            if need > m.tol:
                return np.inf
            lb += count * min((c for _, c in caps), default=0.0)
        return lb

    def visit(depth: int, fixed_open: list[int], closed: set[int]):
        nonlocal best_obj, best_key, best_open, nodes, timed_out
        nodes += 1
        if time_budget is not None and time.perf_counter() - t0 > time_budget:
            timed_out = True
            return
        lb = bound(fixed_open, closed, depth)
        if lb > best_obj + rel * max(1.0, abs(best_obj)):
            return
        if depth == n:
            u, obj, _ = m.evaluate(frozenset(fixed_open))
            if u > 0:
                return
            key = m.open_tuple(fixed_open)
            tol = rel * max(1.0, abs(obj))
            if obj < best_obj - tol or (abs(obj - best_obj) <= tol and key < best_key):
                best_obj, best_key, best_open = obj, key, frozenset(fixed_open)
                history.append(obj)
            return
        fixed_open.append(depth)
        visit(depth + 1, fixed_open, closed)
        fixed_open.pop()
        if timed_out:
            return
        closed.add(depth)
        visit(depth + 1, fixed_open, closed)
        closed.discard(depth)

    visit(0, [], set())
    _, _, flows = m.evaluate(best_open)
    diag = {"nodes": nodes, "bound_history": history, "wall_ms": 1e3 * (time.perf_counter() - t0),
            "evaluations": m.evaluations, "timed_out": timed_out}
    status = OPTIMAL if not timed_out else "feasible-heuristic"
    sol = solution_from_flow(inst, [m.sites[j] for j in best_open], m.flow_matrix(flows), status, "exact",
                             drop_idle=False, diagnostics=diag)
    _log_solve("exact", inst, sol)
    return sol
