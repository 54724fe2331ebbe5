"""Slot-by-slot comparison of placement strategies on a fog hierarchy.

Strategies: DA (walk tiers upwards from the user), QoEAP (capacity/latency
scoring greedy), SMART_FL (facility location per slot) and TIPTOP (facility
location plus forecast-driven reservation). Every slot starts from empty
nodes: services last one slot. Concurrent services are drawn per slot from
the run seed, identically for every strategy.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import binom

from .errors import ConfigurationError, DegenerateInputError, FogPlaceError, InvalidInputError, UnknownEntityError
from .placement.exact import DEFAULT_MAX_DEMANDS, DEFAULT_MAX_FACILITIES
from .placement.heuristic import solve
from .placement.model import (HEURISTIC, NodeState, PlacementInstance, PlacementSolution, build_instance,
                              objective)
from .reservation import ConcurrentService, ReservationPlan, apply_reservation, make_plan, predicted_solution
from .seeding import stage_seed
from .topology import LatencyTable, Topology, latency_table
from .workload import DemandSnapshot, TrafficSeries, classify_intensity, demand_snapshots

STRATEGIES = ("DA", "QoEAP", "SMART_FL", "TIPTOP")
DEFAULT_RELIABILITY = (0.998, 0.9995, 0.9999)  # radio access, base station uplink, core links
REPORT_SCHEMA = "fogplace.simreport/1"


@dataclass
class SimConfig:
    strategy: str = "SMART_FL"
    slots: int | None = None  # None = every snapshot
    interval_s: int = 600
    seed: int = 0
    latency_cap_ms: float = 100.0
    link_reliability: tuple[float, ...] = DEFAULT_RELIABILITY
    concurrent_load_fraction: float = 0.3
    concurrent_max_latency_ms: float = 200.0
    packets_per_unit: int = 100
    capacity_scale: float = 0.015  # capacity units per GB of storage
    max_facilities: int = DEFAULT_MAX_FACILITIES
    max_demands: int = DEFAULT_MAX_DEMANDS

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        if self.slots is not None and self.slots < 1:
            raise ConfigurationError("slots must be >= 1")
        if not self.link_reliability or any(not 0 < r <= 1 for r in self.link_reliability):
            raise ConfigurationError("link reliabilities must lie in (0, 1]")
        if not 0 <= self.concurrent_load_fraction < 1:
            raise ConfigurationError("concurrent_load_fraction must lie in [0, 1)")
        if self.capacity_scale <= 0 or self.interval_s <= 0 or self.packets_per_unit < 1:
            raise ConfigurationError("capacity_scale, interval_s and packets_per_unit must be positive")


@dataclass
class SlotTrace:
    slot: int
    strategy: str
    demanded: float
    placed: float
    content_rate: float
    packets_sent: int
    packets_delivered: int
    packet_rate: float
    avg_latency_ms: float
    link_usage: float
    migration_usage: float
    solver: str = ""


@dataclass
class SimReport:
    strategy: str
    seed: int
    content_delivery_rate: float
    packet_delivery_rate: float
    avg_latency_ms: float
    link_usage: float
    migration_usage: float
    slots: list[SlotTrace] = field(default_factory=list)
    solver_counts: dict[str, int] = field(default_factory=dict)
    objective_total: float = 0.0

    @property
    def network_usage(self) -> float:
        return self.link_usage + self.migration_usage

    def summary(self) -> dict:
        return {
            "strategy": self.strategy, "seed": self.seed,
            "content_delivery_rate": self.content_delivery_rate,
            "packet_delivery_rate": self.packet_delivery_rate,
            "avg_latency_ms": self.avg_latency_ms,
            "network_usage": self.network_usage,
            "link_usage": self.link_usage,
            "migration_usage": self.migration_usage,
            "objective_total": self.objective_total,
            "solver_counts": dict(sorted(self.solver_counts.items())),
            "slots": len(self.slots),
        }


# --- baselines ----------------------------------------------------------------------------

def _solution(inst: PlacementInstance, x: np.ndarray, solver: str) -> PlacementSolution:
    assignment, opened = {}, set()
    for f, k in zip(*np.nonzero(x > 0)):
        fid = inst.facility_ids[f]
        assignment[(fid, int(k))] = float(x[f, k])
        opened.add((fid, inst.demands[k].service_id))
    vol = inst.volumes
    served = x.sum(axis=0)
    unmet = {k: float(vol[k] - served[k]) for k in range(inst.n_demands) if vol[k] - served[k] > 1e-9 * vol[k]}
    sol = PlacementSolution(frozenset(opened), assignment, 0.0, HEURISTIC if not unmet else "infeasible",
                            unmet, solver)
    sol.objective = objective(inst, sol)
    return sol


def strategy_da(inst: PlacementInstance, topo: Topology) -> PlacementSolution:
    """Closest tier first, per demand in region order, spilling upwards when a tier is full.

    Within a tier the node on the user's path goes first, then the other nodes
    of the tier by latency (ties by id). Only arcs within the latency cap are used.
    """
    cap = inst.capacity.copy()
    adm = inst.admissible
    pos = {fid: i for i, fid in enumerate(inst.facility_ids)}
    x = np.zeros((inst.n_facilities, inst.n_demands))
    tiers: dict[int, list[int]] = {}
    for fid in inst.facility_ids:
        tiers.setdefault(topo.nodes[fid].tier, []).append(fid)
    for k in sorted(range(inst.n_demands), key=lambda k: (inst.demands[k].region_id, k)):
        left = inst.demands[k].volume
        on_path = set(topo.ancestors(inst.demands[k].region_id))
        for tier in sorted(tiers):
            order = sorted(tiers[tier], key=lambda f: (f not in on_path, inst.latency[pos[f], k], f))
            for fid in order:
                i = pos[fid]
                if left <= 0:
                    break
                if not adm[i, k] or cap[i] <= 0:
                    continue
                take = min(left, cap[i])
                x[i, k] += take
                cap[i] -= take
                left -= take
            if left <= 0:
                break
    return _solution(inst, x, "DA")


def strategy_qoeap(inst: PlacementInstance, topo: Topology | None = None, seed: int = 0) -> PlacementSolution:
    """Single centralised pass over (node, demand) pairs by descending score.

    score = capacity / max capacity - latency / max latency, over arcs within
    the latency cap; ties by node id then demand index. ``seed`` is accepted
    for interface symmetry; the pass is deterministic.
    """
    adm = inst.admissible
    if not adm.any():
        return _solution(inst, np.zeros((inst.n_facilities, inst.n_demands)), "QoEAP")
    head = inst.capacity / inst.capacity.max()
    lmax = float(inst.latency[adm].max())
    pairs = []
    for i, k in zip(*np.nonzero(adm)):
        score = head[i] - inst.latency[i, k] / lmax
        pairs.append((-score, inst.facility_ids[i], int(k), int(i)))
    pairs.sort()
    cap = inst.capacity.copy()
    left = inst.volumes
    x = np.zeros((inst.n_facilities, inst.n_demands))
    for _, _, k, i in pairs:
        if left[k] <= 0 or cap[i] <= 0:
            continue
        take = min(left[k], cap[i])
        x[i, k] += take
        cap[i] -= take
        left[k] -= take
    return _solution(inst, x, "QoEAP")


# --- helpers --------------------------------------------------------------------------------

def node_capacities(topo: Topology, scale: float) -> dict[int, float]:
    out = {}
    for nid, node in sorted(topo.nodes.items()):
        if node.resources is None:
            raise ConfigurationError(f"node {nid} has no resources; run assign_resources first")
        out[nid] = node.resources.storage_gb * scale
    return out


def path_reliability(topo: Topology, table: LatencyTable, node: int, region: int,
                     reliability: Sequence[float]) -> float:
    """Probability a packet survives the radio hop plus every tree link to ``node``."""
    r = list(reliability) + [reliability[-1]] * 3
    p = r[0]
    path = topo.path(region, node)
    for a, b in zip(path, path[1:]):
        lower = min(topo.nodes[a].tier, topo.nodes[b].tier)
        p *= r[1] if lower == 0 else r[2]
    return p


def concurrent_services(topo: Topology, capacity: Mapping[int, float], fraction: float, seed: int, slot: int,
                        max_latency_ms: float = 200.0) -> list[ConcurrentService]:
    """One concurrent service per node with volume fraction * capacity * U(0.5, 1.5)."""
    if fraction <= 0:
        return []
    rng = np.random.default_rng(stage_seed(seed, f"concurrent/{slot}"))
    out = []
    for idx, nid in enumerate(sorted(topo.nodes)):
        stations = topo.descendant_stations(nid) if topo.nodes[nid].tier else [nid]
        region = stations[int(rng.integers(len(stations)))]
        vol = fraction * capacity[nid] * rng.uniform(0.5, 1.5)
        out.append(ConcurrentService(slot * 100_000 + idx, nid, float(vol), region, max_latency_ms))
    return out


def _pair_moves(prev: Mapping[int, float], cur: Mapping[int, float]) -> list[tuple[int, int, float]]:
    """Pair volume leaving nodes with volume arriving at others (both in id order)."""
    out_ = [(n, prev[n] - cur.get(n, 0.0)) for n in sorted(prev) if prev[n] - cur.get(n, 0.0) > 1e-12]
    in_ = [(n, cur[n] - prev.get(n, 0.0)) for n in sorted(cur) if cur[n] - prev.get(n, 0.0) > 1e-12]
    moves = []
    i = j = 0
    while i < len(out_) and j < len(in_):
        a, va = out_[i]
        b, vb = in_[j]
        m = min(va, vb)
        moves.append((a, b, m))
        out_[i] = (a, va - m)
        in_[j] = (b, vb - m)
        if out_[i][1] <= 1e-12:
            i += 1
        if in_[j][1] <= 1e-12:
            j += 1
    return moves


class _Hops:
    def __init__(self, topo: Topology):
        self.topo = topo
        self.cache: dict[tuple[int, int], int] = {}

    def __call__(self, a: int, b: int) -> int:
        key = (a, b) if a <= b else (b, a)
        h = self.cache.get(key)
        if h is None:
            h = self.cache[key] = self.topo.hops(a, b)
        return h


# --- simulation -------------------------------------------------------------------------

def run(topo: Topology, snapshots: Sequence[DemandSnapshot], forecasts: Sequence[DemandSnapshot] | None,
        config: SimConfig, events: list | None = None) -> SimReport:
    """Simulate one strategy over the snapshot sequence.

    ``forecasts[t]`` is the demand predicted for slot t from data up to t-1;
    only TIPTOP reads it. When ``events`` is a list, placement, migration,
    reservation and waiver records are appended to it.
    """
    config.validate()
    n_slots = len(snapshots) if config.slots is None else config.slots
    if n_slots > len(snapshots):
        raise InvalidInputError(f"{n_slots} slots requested but only {len(snapshots)} snapshots given")
    strategy = config.strategy
    if strategy == "TIPTOP" and (forecasts is None or len(forecasts) < n_slots):
        raise ConfigurationError("TIPTOP needs a forecast snapshot for every slot")
    table = latency_table(topo)
    capacity = node_capacities(topo, config.capacity_scale)
    hops = _Hops(topo)
    rel_cache: dict[tuple[int, int], float] = {}
    all_regions = table.region_ids
    all_nodes = table.node_ids
    rpos = {r: j for j, r in enumerate(all_regions)}
    npos = {n: i for i, n in enumerate(all_nodes)}

    def reliability(n: int, r: int) -> float:
        key = (n, r)
        p = rel_cache.get(key)
        if p is None:
            p = rel_cache[key] = path_reliability(topo, table, n, r, config.link_reliability)
        return p

    tot_dem = tot_placed = tot_unmet = tot_lat = 0.0
    tot_sent = tot_deliv = 0
    tot_link = tot_mig = tot_obj = 0.0
    traces: list[SlotTrace] = []
    solver_counts: dict[str, int] = {}
    prev_place: dict[int, dict[int, float]] = {}  # region -> node -> volume
    plan: ReservationPlan | None = None
    # previous answers seed the next slot's local search
    warm: frozenset | None = None
    warm_pred: frozenset | None = None

    for t in range(n_slots):
        snap = snapshots[t]
        base = {n: NodeState(c) for n, c in capacity.items()}
        conc = concurrent_services(topo, capacity, config.concurrent_load_fraction, config.seed, t,
                                   config.concurrent_max_latency_ms)
        admitted = apply_reservation(base, plan if strategy == "TIPTOP" else None, conc, topo, table)
        mig_usage = 0.0
        if events is not None and plan is not None and strategy == "TIPTOP":
            for rec in admitted.audit:
                events.append({"slot": t, "strategy": strategy, **rec})
        conc_volume = {c.service_id: c.volume for c in conc}
        for sid, a, b in admitted.migrations:
            mig_usage += conc_volume[sid] * hops(a, b) / config.interval_s
        # reserved capacity is held for multimedia, so it is free for the placement itself
        state = {n: NodeState(s.capacity, s.used, 0.0) for n, s in admitted.state.items()}

        demanded = float(sum(v for v in snap.demands.values() if v > 0))
        sol = None
        inst = None
        solver_used = ""
        if demanded > 0:
            inst = build_instance(topo, snap, state, config.latency_cap_ms, t=t, table=table)
            try:
                if strategy == "DA":
                    sol = strategy_da(inst, topo)
                elif strategy == "QoEAP":
                    sol = strategy_qoeap(inst, topo, config.seed)
                else:
                    sol = solve(inst, config.max_facilities, config.max_demands, seed=config.seed, initial=warm)
                    warm = sol.open
            except FogPlaceError as exc:
                sol = strategy_da(inst, topo)
                if events is not None:
                    events.append({"slot": t, "strategy": strategy, "event": "degraded", "error": str(exc)})
            solver_used = sol.solver
            solver_counts[solver_used] = solver_counts.get(solver_used, 0) + 1

        placed = lat_sum = link = 0.0
        unmet = demanded
        sent = int(round(demanded * config.packets_per_unit))
        delivered = 0
        cur_place: dict[int, dict[int, float]] = {}
        if sol is not None:
            tot_obj += sol.objective
            pos = {fid: i for i, fid in enumerate(inst.facility_ids)}
            u = np.random.default_rng(stage_seed(config.seed, f"packets/{t}")).random((len(all_nodes), len(all_regions)))
            ns, ps, us = [], [], []
            served: dict[int, float] = {}
            for (fid, k), v in sorted(sol.assignment.items()):
                region = inst.demands[k].region_id
                lat = float(inst.latency[pos[fid], k])
                if lat > config.latency_cap_ms:
                    continue  # late content does not count as delivered
                served[k] = served.get(k, 0.0) + v
                lat_sum += lat * v
                link += v * hops(fid, region) / config.interval_s
                cur_place.setdefault(region, {})
                cur_place[region][fid] = cur_place[region].get(fid, 0.0) + v
                ns.append(int(round(v * config.packets_per_unit)))
                ps.append(reliability(fid, region))
                us.append(u[npos[fid], rpos[region]])
                if events is not None:
                    events.append({"slot": t, "strategy": strategy, "event": "place", "node": fid,
                                   "region": region, "volume": v, "latency_ms": lat})
            # unmet volume is tracked directly so that a fully served slot has
            # rate exactly 1; flow round-off below the solver tolerance is ignored
            unmet = 0.0
            lost = 0
            for k, d in enumerate(inst.demands):
                v = served.get(k, 0.0)
                placed += v
                if d.volume - v > 1e-9 * d.volume:
                    unmet += d.volume - v
                    lost += int(round((d.volume - v) * config.packets_per_unit))
            # packets of unplaced volume count as sent and lost
            sent = sum(ns) + lost
            if ns:
                delivered = int(binom.ppf(np.array(us), np.array(ns), np.array(ps)).sum())
        for region, now in cur_place.items():
            before = prev_place.get(region)
            if before:
                scale = min(sum(now.values()), sum(before.values())) / max(sum(before.values()), 1e-300)
                moves = _pair_moves({n: v * scale for n, v in before.items()}, now)
                for a, b, m in moves:
                    mig_usage += m * hops(a, b) / config.interval_s
        prev_place = cur_place

        # TIPTOP: plan the next slot from the forecast
        if strategy == "TIPTOP" and t + 1 < n_slots:
            current_nodes = sol.open_nodes if sol is not None else set()
            try:
                pred = predicted_solution(topo, forecasts[t + 1], state, config.latency_cap_ms,
                                          config.max_facilities, config.max_demands, config.seed, table,
                                          initial=warm_pred)
                if pred is not None:
                    warm_pred = pred.open
            except FogPlaceError as exc:
                pred = None
                if events is not None:
                    events.append({"slot": t, "strategy": strategy, "event": "prediction_failed", "error": str(exc)})
            plan = make_plan(t + 1, current_nodes, pred)
            if events is not None:
                events.append({"slot": t, "strategy": strategy, "event": "plan", "t_next": t + 1,
                               "Y": sorted(plan.Y), "Gamma": sorted(plan.Gamma),
                               "reserved": {str(k): v for k, v in plan.reserved_capacity.items()}})

        tot_dem += demanded
        tot_placed += placed
        tot_unmet += unmet
        tot_lat += lat_sum
        tot_sent += sent
        tot_deliv += delivered
        tot_link += link
        tot_mig += mig_usage
        traces.append(SlotTrace(t, strategy, demanded, placed, 1.0 - unmet / demanded if demanded else 1.0, sent,
                                delivered, delivered / sent if sent else 1.0, lat_sum / placed if placed else 0.0,
                                link, mig_usage, solver_used))

    return SimReport(strategy, config.seed,
                     1.0 - tot_unmet / tot_dem if tot_dem else 1.0,
                     tot_deliv / tot_sent if tot_sent else 1.0,
                     tot_lat / tot_placed if tot_placed else 0.0,
                     tot_link, tot_mig, traces, solver_counts, tot_obj)


def run_all(topo: Topology, snapshots: Sequence[DemandSnapshot], forecasts: Sequence[DemandSnapshot] | None,
            config: SimConfig, strategies: Sequence[str] = STRATEGIES) -> dict[str, SimReport]:
    out = {}
    for s in strategies:
        cfg = SimConfig(**{**asdict(config), "strategy": s})
        out[s] = run(topo, snapshots, forecasts, cfg)
    return out


# --- reports --------------------------------------------------------------------------

TRACE_COLUMNS = ("slot", "strategy", "content_rate", "packet_rate", "avg_latency_ms", "link_usage", "migration_usage")


def traces_to_csv(reports: Sequence[SimReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for rep in reports:
        for tr in rep.slots:
            w.writerow([tr.slot, tr.strategy] + [repr(float(getattr(tr, c))) for c in TRACE_COLUMNS[2:]])
    return buf.getvalue()


def reports_to_json(reports: Sequence[SimReport]) -> str:
    return json.dumps({"schema": REPORT_SCHEMA, "reports": [r.summary() for r in reports]},
                      sort_keys=True, indent=2) + "\n"


def events_to_jsonl(events: Sequence[dict]) -> str:
    return "".join(json.dumps(e, sort_keys=True) + "\n" for e in events)


# --- snapshot analysis -----------------------------------------------------------------

@dataclass
class SnapshotAnalysis:
    slot: int
    intensity: str
    demand: dict[int, float]
    selected: list[int]
    nodes: list[dict]  # id, tier, capacity, latency_ms, selected


def snapshot_report(topo: Topology, series: Sequence[TrafficSeries], slots: Sequence[int],
                    capacity_scale: float = 0.015, latency_cap_ms: float = 100.0, seed: int = 0,
                    concurrent_load_fraction: float = 0.0) -> list[SnapshotAnalysis]:
    """Intensity class, facility-location node selection and per-node capacity/latency for chosen slots."""
    snaps = demand_snapshots(series)
    n = len(snaps)
    for s in slots:
        if not 0 <= s < n:
            raise UnknownEntityError(f"slot {s} is outside 0..{n - 1}")
    try:
        labels = classify_intensity(series, k=3, seed=seed, per_slot=True)
    except DegenerateInputError:
        labels = {}  # fewer than three distinct slot totals: leave unclassified
    capacity = node_capacities(topo, capacity_scale)
    table = latency_table(topo)
    any_region = series[0].region_id if series else None
    out = []
    for s in slots:
        snap = snaps[s]
        base = {nid: NodeState(c) for nid, c in capacity.items()}
        conc = concurrent_services(topo, capacity, concurrent_load_fraction, seed, s)
        state = apply_reservation(base, None, conc, topo, table).state
        selected: list[int] = []
        lat_of: dict[int, float] = {}
        if snap.demands:
            inst = build_instance(topo, snap, state, latency_cap_ms, t=s, table=table)
            sol = solve(inst, seed=seed)
            selected = sorted(sol.open_nodes)
            for i, fid in enumerate(inst.facility_ids):
                lat_of[fid] = float(inst.latency[i].mean())
        rows = []
        for nid in sorted(topo.nodes):
            if nid not in lat_of and any_region is not None:
                lat_of[nid] = table.latency(nid, any_region, state[nid].load_fraction) if not snap.demands else \
                    float(np.mean([table.latency(nid, r, state[nid].load_fraction) for r in snap.demands]))
            rows.append({"id": nid, "tier": topo.nodes[nid].tier, "capacity": state[nid].free,
                         "latency_ms": lat_of.get(nid, 0.0), "selected": nid in selected})
        label = labels.get((series[0].region_id, s), "unclassified") if series else "unclassified"
        out.append(SnapshotAnalysis(s, label, dict(snap.demands), selected, rows))
    return out


def snapshot_report_csv(analyses: Sequence[SnapshotAnalysis]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot", "intensity", "node", "tier", "capacity", "latency_ms", "selected"])
    for a in analyses:
        for r in a.nodes:
            w.writerow([a.slot, a.intensity, r["id"], r["tier"], repr(r["capacity"]), repr(r["latency_ms"]),
                        int(r["selected"])])
    return buf.getvalue()


def snapshot_report_json(analyses: Sequence[SnapshotAnalysis]) -> str:
    return json.dumps([{"slot": a.slot, "intensity": a.intensity, "selected": a.selected,
                        "demand": {str(k): v for k, v in sorted(a.demand.items())}, "nodes": a.nodes}
                       for a in analyses], sort_keys=True, indent=2) + "\n"


# --- seeded scenario --------------------------------------------------------------------

@dataclass
class Scenario:
    topology: Topology
    series: list[TrafficSeries]  # simulated days only
    snapshots: list[DemandSnapshot]
    forecasts: list[DemandSnapshot]  # forecasts[t] predicts snapshots[t]


def scenario_from_series(topo: Topology, series: Sequence[TrafficSeries], warmup_slots: int,
                         seed: int = 0) -> Scenario:
    """Split each series into warm-up and simulated parts and forecast the latter one step ahead.

    Each region's ARIMA(1,1,1) is fitted on the warm-up slots and then
    predicts every simulated slot from the observations before it.
    """
    from .forecast.arima import fit_arima, one_step_forecasts

    n = len(series[0]) if series else 0
    if not 3 <= warmup_slots < n:
        raise ConfigurationError(f"warm-up must cover 3..{n - 1} slots, got {warmup_slots}")
    missing = sorted({s.region_id for s in series} - set(topo.stations))
    if missing:
        raise UnknownEntityError(f"regions without a base station: {missing[:5]}")
    actual, predicted = [], []
    for s in series:
        model = fit_arima(s.values[:warmup_slots], 1, 1, 1, seed=stage_seed(seed, f"arima/{s.region_id}"))
        pred = np.clip(one_step_forecasts(model, s.values, warmup_slots), 0.0, None)
        start = s.start_time + warmup_slots * s.interval_s
        actual.append(TrafficSeries(s.region_id, start, s.values[warmup_slots:], s.interval_s))
        predicted.append(TrafficSeries(s.region_id, start, pred, s.interval_s))
    return Scenario(topo, actual, demand_snapshots(actual), demand_snapshots(predicted))


def build_scenario(regions: int = 20, days: int = 7, warmup_days: int = 3, seed: int = 0,
                   radius_m: float = 3000.0, mu: int = 2, noise_sd: float = 6.0) -> Scenario:
    """Random stations, the tree over them and diurnal traffic, forecast as in ``scenario_from_series``."""
    from .topology import assign_resources, build_hierarchy, random_stations
    from .workload import SynthConfig, synth_workload

    if warmup_days < 1:
        raise ConfigurationError("warmup_days must be >= 1")
    stations = random_stations(regions, seed=stage_seed(seed, "stations"))
    topo = build_hierarchy(stations, radius_m=radius_m, mu=mu, seed=stage_seed(seed, "hierarchy"))
    assign_resources(topo, seed=stage_seed(seed, "resources"))
    cfg = SynthConfig(regions=regions, days=warmup_days + days, noise_sd=noise_sd)
    full = synth_workload(cfg, seed=stage_seed(seed, "workload"))
    return scenario_from_series(topo, full, warmup_days * cfg.slots_per_day, seed)
