"""Greedy construction plus open/close/swap local search for large instances."""
from __future__ import annotations

import time
from typing import Iterable

import numpy as np

from .exact import DEFAULT_MAX_DEMANDS, DEFAULT_MAX_FACILITIES, SiteModel, _log_solve, solve_exact
from .model import HEURISTIC, INFEASIBLE, PlacementInstance, PlacementSolution, solution_from_flow

# Move lists at most this long are evaluated exhaustively with the exact
# assignment; longer lists are ranked by the greedy estimate first.
EXHAUSTIVE_MOVES = 64
SCREENED_MOVES = 6
# Above the limit, swaps pair only the best few single opens and closes.
SWAP_CANDIDATES = 5


def greedy_assignment(m: SiteModel, open_sites) -> tuple[float, float]:
    """(unmet, objective) when demands are poured into open sites cheapest arc first."""
    arcs = getattr(m, "_sorted_arcs", None)
    if arcs is None:
        arcs = m._sorted_arcs = sorted((c, k, j, m.site_facility[j]) for j in range(len(m.sites))
                                       for k, c in m.arcs[j])
    left = list(m.volume)
    room = list(m.capacity)
    cost = sum(m.site_cost[j] for j in open_sites)
    pending = sum(1 for v in left if v > 0)
    for c, k, j, f in arcs:
        if j not in open_sites or left[k] <= 0 or room[f] <= 0:
            continue
        take = min(left[k], room[f])
        left[k] -= take
        room[f] -= take
        cost += c * take
        if left[k] <= 0:
            pending -= 1
            if not pending:
                break
    u = sum(left)
    return (u if u > m.tol else 0.0), cost


def _better(a: tuple[float, float], b: tuple[float, float], tol: float) -> bool:
    """Lexicographic (unmet, objective) comparison with tolerance."""
    if a[0] < b[0] - tol:
        return True
    if a[0] > b[0] + tol:
        return False
    return a[1] < b[1] - 1e-12 * max(1.0, abs(b[1]))


def solve_heuristic(inst: PlacementInstance, seed: int = 0, max_iter: int = 500,
                    initial: Iterable[tuple[int, int]] | None = None) -> PlacementSolution:
    """Feasible placement without optimality guarantee.

    Construction opens, one at a time, the site with the best improvement per
    unit of capacity under a cheapest-arc-first assignment. Local search then
    applies improving open, close and swap moves, re-solving the assignment
    exactly for each, until none improves (unmet volume first, then objective).
    ``seed`` only orders otherwise tied moves.

    ``initial`` is an optional set of (node id, service) flags, usually the
    previous slot's answer. Local search starts there instead of from the
    construction when it serves every demand.
    """
    t0 = time.perf_counter()
    if inst.n_demands == 0:
        return PlacementSolution(frozenset(), {}, 0.0, HEURISTIC, solver="heuristic",
                                 diagnostics={"iterations": 0, "history": [], "wall_ms": 0.0})
    m = SiteModel(inst)
    n = len(m.sites)
    rank = np.random.default_rng(seed).permutation(n).tolist()
    tol = m.tol

    warm = None
    if initial is not None:
        index = {(inst.facility_ids[f], sv): j for j, (f, sv) in enumerate(m.sites)}
        warm = frozenset(index[key] for key in initial if key in index)
        if m.evaluate(warm)[0] > 0:
            warm = None

    # construction, lazily: a site's gain rarely grows as others open, so
    # stale gains order the re-evaluation and bound it
    current: set[int] = set()
    cur = (m.total, 0.0)

    def gain(j: int):
        trial = greedy_assignment(m, current | {j})
        if not _better(trial, cur, tol):
            return None
        capj = m.capacity[m.site_facility[j]]
        return ((cur[0] - trial[0]) / capj, (cur[1] - trial[1]) / capj, -rank[j])

    stale = {j: gain(j) for j in range(n)} if warm is None else {}
    while True:
        order = sorted((g, j) for j, g in stale.items() if g is not None)[::-1]
        if not order:
            break
        best_j, best_score = -1, None
        for g, j in order:
            if best_score is not None and g[:2] < best_score[:2]:
                break
            fresh = stale[j] = gain(j)
            if fresh is not None and (best_score is None or fresh > best_score):
                best_j, best_score = j, fresh
        if best_j < 0:
            break
        current.add(best_j)
        del stale[best_j]
        cur = greedy_assignment(m, current)

    state = frozenset(current) if warm is None else warm
    u, obj, _ = m.evaluate(state)
    if u > 0:
        # coverage first: start from everything open if that serves more
        u_all, obj_all, _ = m.evaluate(frozenset(range(n)))
        if u_all < u - tol:
            state, u, obj = frozenset(range(n)), u_all, obj_all
    cur = (u, obj)
    history = [cur]
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        opened = sorted(state)
        closed = [j for j in range(n) if j not in state]
        drops = [state - {j} for j in opened]
        adds = [state | {j} for j in closed]
        if len(opened) * len(closed) + n <= EXHAUSTIVE_MOVES:
            moves = drops + adds + [(state - {a}) | {b} for a in opened for b in closed]
        else:
            est_drop = sorted((greedy_assignment(m, mv), j) for mv, j in zip(drops, opened))
            est_add = sorted((greedy_assignment(m, mv), j) for mv, j in zip(adds, closed))
            swaps = [(state - {a}) | {b} for _, a in est_drop[:SWAP_CANDIDATES] for _, b in est_add[:SWAP_CANDIDATES]]
            est = [(e, 0, sorted(state - {j})) for e, j in est_drop] + [(e, 0, sorted(state | {j})) for e, j in est_add]
            est += [(greedy_assignment(m, mv), 1, sorted(mv)) for mv in swaps]
            est.sort()
            moves = [frozenset(mv) for _, _, mv in est[:SCREENED_MOVES]]
        best_mv, best_val = None, cur
        for mv in moves:
            mu, mo, _ = m.evaluate(mv)
            if _better((mu, mo), best_val, tol):
                best_mv, best_val = mv, (mu, mo)
        if best_mv is None:
            break
        state, cur = best_mv, best_val
        history.append(cur)

    _, _, flows = m.evaluate(state)
    status = HEURISTIC if cur[0] <= 0 else INFEASIBLE
    diag = {"iterations": iterations, "history": [h[1] for h in history], "unmet_history": [h[0] for h in history],
            "evaluations": m.evaluations, "wall_ms": 1e3 * (time.perf_counter() - t0)}
    sol = solution_from_flow(inst, [m.sites[j] for j in state], m.flow_matrix(flows), status, "heuristic",
                             diagnostics=diag)
    _log_solve("heuristic", inst, sol)
    return sol


def solve(inst: PlacementInstance, max_facilities: int = DEFAULT_MAX_FACILITIES,
          max_demands: int = DEFAULT_MAX_DEMANDS, seed: int = 0,
          initial: Iterable[tuple[int, int]] | None = None) -> PlacementSolution:
    """Exact within the size limits, heuristic above them; ``solution.solver`` says which ran.

    ``initial`` only seeds the heuristic's local search.
    """
    if inst.n_facilities <= max_facilities and inst.n_demands <= max_demands:
        return solve_exact(inst, max_facilities, max_demands)
    return solve_heuristic(inst, seed=seed, initial=initial)
