"""Transportation problem with divisible demand, solved as min-cost max-flow.

Network: source -> demand k (capacity = volume) -> facility f (cost lat[k][f],
only on usable arcs) -> sink (capacity = cap[f]). Instances are small (tens of
nodes), so the solver works on plain Python lists; numpy call overhead would
dominate at this size.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import FogPlaceError

INF = float("inf")


@dataclass
class FlowResult:
    x: np.ndarray  # (demands, facilities)
    cost: float
    unmet: np.ndarray  # per demand
    augmentations: int = 0

    @property
    def total_unmet(self) -> float:
        return float(self.unmet.sum())


def transport(lat: np.ndarray, usable: np.ndarray, volume: np.ndarray, capacity: np.ndarray) -> FlowResult:
    """Cheapest assignment of as much volume as the capacities allow (dense inputs, shape (D, F))."""
    lat = np.asarray(lat, dtype=float)
    usable = np.asarray(usable, dtype=bool)
    D, F = lat.shape
    adj = [[(int(f), float(lat[k, f])) for f in np.flatnonzero(usable[k])] for k in range(D)]
    flows, cost, unmet, aug = transport_lists(adj, [float(v) for v in volume], [float(c) for c in capacity])
    x = np.zeros((D, F))
    for k, row in enumerate(flows):
        for f, v in row.items():
            x[k, f] = v
    return FlowResult(x, cost, np.array(unmet, dtype=float), aug)


def transport_lists(adj: Sequence[Sequence[tuple[int, float]]], volume: Sequence[float],
                    capacity: Sequence[float]) -> tuple[list[dict[int, float]], float, list[float], int]:
    """Core solver. ``adj[k]`` lists (facility, cost) arcs usable by demand k.

    Returns per-demand flow dicts, total cost, per-demand unmet volume and the
    number of augmenting paths used. The flow is min-cost among maximum flows.
    """
    D = len(adj)
    F = len(capacity)
    tol = 1e-12 * max(sum(volume), sum(capacity), 1.0)
    x: list[dict[int, float]] = [dict() for _ in range(D)]
    if D == 0:
        return x, 0.0, [], 0
    # cheapest arc per demand; ties to the lowest facility index
    best = []
    for arcs in adj:
        b, bc = -1, INF
        for f, c in arcs:
            if c < bc or (c == bc and f < b):
                b, bc = f, c
        best.append(b)
    load = [0.0] * F
    for k, f in enumerate(best):
        if f >= 0:
            load[f] += volume[k]
    if all(load[f] <= capacity[f] + tol for f in range(F)):
        for k, f in enumerate(best):
            if f >= 0:
                x[k][f] = volume[k]
        return _finish(adj, x, volume, tol, 0)

    # Warm start: fill facilities with their nearest demands up to capacity. Every unit
    # then sits on its demand's cheapest arc, so the pseudoflow has no negative residual
    # cycle once supplies are treated as fixed. That reading only holds if every reachable
    # demand ends fully served; otherwise re-solve from zero flow.
    supply = list(volume)
    resid = list(capacity)
    for k, f in enumerate(best):
        if f >= 0:
            take = min(volume[k], resid[f])
            if take > tol:
                x[k][f] = take
                supply[k] -= take
                resid[f] -= take
    aug = _augment(adj, x, supply, resid, tol)
    if all(supply[k] <= tol for k in range(D) if best[k] >= 0):
        return _finish(adj, x, volume, tol, aug)
    x = [dict() for _ in range(D)]
    supply = list(volume)
    resid = list(capacity)
    aug += _augment(adj, x, supply, resid, tol)
    return _finish(adj, x, volume, tol, aug)


def _finish(adj, x, volume, tol, aug):
    cost = 0.0
    unmet = []
    for k, arcs in enumerate(adj):
        costs = dict(arcs)
        served = 0.0
        for f, v in x[k].items():
            cost += costs[f] * v
            served += v
        u = volume[k] - served
        unmet.append(u if u > tol else 0.0)
    return x, cost, unmet, aug


def _augment(adj, x, supply, resid, tol) -> int:
    """Successive shortest paths from demands with supply left; updates x, supply, resid in place."""
    D, F = len(adj), len(resid)
    cmax = max((abs(c) for arcs in adj for _, c in arcs), default=1.0)
    ceps = 1e-12 * max(1.0, cmax)
    cost_of = [dict(arcs) for arcs in adj]
    aug = 0
    limit = 10 * (D + 1) * (F + 1) + 100
    while True:
        active = [k for k in range(D) if supply[k] > tol and adj[k]]
        if not active:
            return aug
        # demands currently holding flow at each facility (backward residual arcs)
        holders: list[list[int]] = [[] for _ in range(F)]
        for k in range(D):
            for f, v in x[k].items():
                if v > tol:
                    holders[f].append(k)
        dist_d = [INF] * D
        pred_d = [-1] * D  # facility we stepped back from; -1 = start
        dist_f = [INF] * F
        pred_f = [-1] * F
        queued = [False] * D
        queue = deque(active)
        for k in active:
            dist_d[k] = 0.0
            queued[k] = True
        pops = 0
        pop_limit = (D + 1) * (D + F + 2)
        while queue:
            k = queue.popleft()
            queued[k] = False
            pops += 1
            if pops > pop_limit:
                raise FogPlaceError("negative cycle in transportation residual graph")
            dk = dist_d[k]
            for f, c in adj[k]:
                nd = dk + c
                if nd < dist_f[f] - ceps:
                    dist_f[f] = nd
                    pred_f[f] = k
                    for k2 in holders[f]:
                        nd2 = nd - cost_of[k2][f]
                        if nd2 < dist_d[k2] - ceps:
                            dist_d[k2] = nd2
                            pred_d[k2] = f
                            if not queued[k2]:
                                queued[k2] = True
                                queue.append(k2)
        end, bestd = -1, INF
        for f in range(F):
            if resid[f] > tol and dist_f[f] < bestd:
                end, bestd = f, dist_f[f]
        if end < 0:
            return aug
        fwd, bwd = [], []
        f = end
        while True:
            k = pred_f[f]
            fwd.append((k, f))
            if pred_d[k] < 0:
                break
            f = pred_d[k]
            bwd.append((k, f))
            if len(bwd) > D + F:
                raise FogPlaceError("cycle in shortest-path tree")
        k0 = fwd[-1][0]
        delta = min(supply[k0], resid[end])
        for k, f in bwd:
            delta = min(delta, x[k][f])
        for k, f in fwd:
            x[k][f] = x[k].get(f, 0.0) + delta
        for k, f in bwd:
            nv = x[k][f] - delta
            if nv <= tol:
                del x[k][f]
            else:
                x[k][f] = nv
        supply[k0] -= delta
        resid[end] -= delta
        aug += 1
        if aug > limit:
            raise FogPlaceError("transportation solver failed to terminate")
