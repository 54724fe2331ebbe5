"""Acceptance suite: one test per criterion, each at its stated tolerance and time budget."""
import hashlib
import math
import time
from itertools import cycle

import networkx as nx
import numpy as np

from fogplace.cli import main
from fogplace.forecast import evaluate, naive_last_value
from fogplace.forecast.arima import auto_arima, fit_arima, one_step_forecasts
from fogplace.forecast.lstm import LstmHyperparams, init_lstm, lstm_evaluate, lstm_gradient_check, lstm_train
from fogplace.placement import INFEASIBLE, solve_exact, solve_heuristic, verify
from fogplace.reservation import reserve
from fogplace.simulate import SimConfig, build_scenario, run_all
from fogplace.topology import (build_hierarchy, check_topology, clustered_stations, random_stations,
                               write_stations_csv)
from fogplace.workload import SynthConfig, kmeans_1d, synth_workload

from instances import geometric_instance, integer_family
from oracles import arima_series, brute_force_cflp


def test_01_exact_solver_equals_brute_force():
    t0 = time.perf_counter()
    count = mismatches = finite = 0
    for inst in integer_family(per_shape=22):
        count += 1
        sol = solve_exact(inst)
        best = brute_force_cflp(inst)
        if sol.status == INFEASIBLE:
            mismatches += best != math.inf
        else:
            finite += 1
            mismatches += sol.objective != best
    elapsed = time.perf_counter() - t0
    assert count >= 500 and finite >= 500, (count, finite)
    assert mismatches == 0
    assert elapsed < 60, elapsed


def test_02_heuristic_within_ten_percent():
    t0 = time.perf_counter()
    close = feasible = 0
    for seed in range(200):
        inst = geometric_instance(seed, max_f=8)
        h = solve_heuristic(inst, seed=seed)
        e = solve_exact(inst, max_facilities=8)
        feasible += verify(inst, h).feasible and h.total_unmet == 0
        close += h.objective <= 1.10 * e.objective
    elapsed = time.perf_counter() - t0
    assert feasible == 200
    assert close >= 190, close
    assert elapsed < 60, elapsed


def _reaches_root(topo):
    g = nx.DiGraph((n.id, n.parent) for n in topo.nodes.values() if n.parent is not None)
    g.add_nodes_from(topo.nodes)
    return all(nx.has_path(g, s, topo.root) for s in topo.stations)


def test_03_hierarchy_invariants():
    rng = np.random.default_rng(2024)
    violations = []
    for layout, mu in zip(range(50), cycle((1, 2, 3))):
        n = int(rng.integers(20, 201))
        if layout % 2:
            stations = clustered_stations(n, clusters=int(rng.integers(2, 8)), seed=layout)
        else:
            stations = random_stations(n, seed=layout, width_m=float(rng.uniform(8_000, 30_000)))
        topo = build_hierarchy(stations, radius_m=3000, mu=mu, seed=layout)
        sizes = topo.tier_sizes()
        problems = list(check_topology(topo))
        roots = [k for k, v in topo.nodes.items() if v.parent is None]
        if len(roots) != 1 or sizes[-1] != 1:
            problems.append("root")
        if sizes[0] != n or any(b >= a for a, b in zip(sizes, sizes[1:])):
            problems.append(f"sizes {sizes}")
        if any(topo.nodes[v.parent].tier != v.tier + 1 for v in topo.nodes.values() if v.parent is not None):
            problems.append("parent tier")
        if not _reaches_root(topo):
            problems.append("reachability")
        violations += [(layout, n, mu, p) for p in problems]
    assert violations == []


def test_04_arima_recovery_and_order_selection():
    t0 = time.perf_counter()
    phi_ok = order_ok = 0
    for seed in range(50):
        y = arima_series(2000, phi=0.6, theta=0.3, seed=seed)
        phi_ok += abs(fit_arima(y, 1, 1, 1, seed=seed).phi[0] - 0.6) <= 0.15
        order_ok += auto_arima(y, seed=seed).order == (1, 1, 1)
    elapsed = time.perf_counter() - t0
    assert phi_ok >= 45 and order_ok >= 40, f"phi within 0.15: {phi_ok}/50, auto picks (1,1,1): {order_ok}/50"
    assert elapsed < 120, elapsed


def test_05_lstm_gradient_check():
    t0 = time.perf_counter()
    clean, corrupted = [], []
    gates = cycle(("forget", "input", "candidate", "output"))
    for seed in range(20):
        rng = np.random.default_rng(seed)
        window, hidden, layers = int(rng.integers(2, 11)), int(rng.integers(1, 9)), 1 + seed % 2
        model = init_lstm(window, hidden, layers=layers, seed=seed, scale=0.5)
        x, target = rng.random(window), float(rng.random())
        loss = "mse" if seed % 3 else "mae"
        clean.append(lstm_gradient_check(model, x, target, loss=loss))
        corrupted.append(lstm_gradient_check(model, x, target, loss=loss, corrupt_gate=next(gates)))
    elapsed = time.perf_counter() - t0
    assert max(clean) <= 1e-4, max(clean)
    assert min(corrupted) > 1e-2, min(corrupted)
    assert elapsed < 60, elapsed


def test_06_lstm_beats_arima_on_diurnal_traffic():
    t0 = time.perf_counter()
    hyper = LstmHyperparams(epochs=150)
    lstm_wins = both_beat_naive = 0
    for seed in range(20):
        y = synth_workload(SynthConfig(regions=1, days=10), seed=seed)[0].values
        cut = int(len(y) * 40 / 62)
        arima = evaluate(one_step_forecasts(fit_arima(y[:cut], 1, 1, 1, seed=seed), y, cut), y[cut:])
        lstm = lstm_evaluate(lstm_train(y[:cut], hyper, seed=seed).model, y, cut)
        naive = evaluate(naive_last_value(y, cut), y[cut:])
        lstm_wins += lstm.mae <= arima.mae
        both_beat_naive += lstm.mae < naive.mae and arima.mae < naive.mae
    elapsed = time.perf_counter() - t0
    assert lstm_wins >= 14, lstm_wins
    assert both_beat_naive == 20, both_beat_naive
    assert elapsed < 600, elapsed


def test_07_reservation_algebra():
    Y, gamma = reserve({"E", "C"}, {"E", "C", "D"})
    assert (Y, gamma) == ({"E", "C"}, {"E", "C", "D"})
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(1000):
        universe = int(rng.integers(1, 40))
        a = set(rng.choice(universe, size=int(rng.integers(0, universe + 1)), replace=False).tolist())
        p = set(rng.choice(universe, size=int(rng.integers(0, universe + 1)), replace=False).tolist())
        Y, gamma = reserve(a, p)
        bad += not (Y <= gamma and gamma >= p and Y == a & p and gamma == Y | p)
    assert bad == 0


def test_08_strategy_ordering():
    t0 = time.perf_counter()
    held, detail = 0, []
    for seed in range(10):
        sc = build_scenario(regions=20, days=7, seed=seed)
        r = run_all(sc.topology, sc.snapshots, sc.forecasts, SimConfig(seed=seed, concurrent_load_fraction=0.3))
        lat = {k: v.avg_latency_ms for k, v in r.items()}
        pkt = {k: v.packet_delivery_rate for k, v in r.items()}
        cont = {k: v.content_delivery_rate for k, v in r.items()}
        ok = (lat["TIPTOP"] <= lat["SMART_FL"] <= lat["DA"]
              and pkt["TIPTOP"] >= pkt["SMART_FL"] >= pkt["QoEAP"]
              and cont["SMART_FL"] >= cont["QoEAP"])
        held += ok
        detail.append((seed, ok, lat, pkt, cont))
    elapsed = time.perf_counter() - t0
    assert held >= 8, detail
    assert elapsed < 600, elapsed


def _pipeline(root):
    """Every command once; returns {relative output path: sha256}."""
    root.mkdir()
    (root / "stations.csv").write_text(write_stations_csv(random_stations(4, seed=5, width_m=2350)))
    (root / "cdr.tsv").write_text("grid_id\ttimestamp\ttraffic\n" + "".join(
        f"{g}\t{1383264000000 + 600_000 * k}\t{(g * 7 + k) % 11 / 3}\n" for g in range(1, 101, 3) for k in range(6)))
    steps = [
        ["workload", "ingest", "--cdr", "cdr.tsv", "--stations", "stations.csv", "--grid-side", "10",
         "--check-conservation", "--out", "ingested.csv"],
        ["topology", "build", "--synthetic", "12", "--seed", "5", "--out", "topo.json"],
        ["workload", "synth", "--regions", "12", "--days", "4", "--seed", "5", "--out", "series.csv",
         "--snapshots-out", "snaps.csv"],
        ["forecast", "fit", "--series", "series.csv", "--auto", "--out", "arima.json"],
        ["forecast", "fit", "--model", "lstm", "--series", "series.csv", "--window", "8", "--hidden", "4",
         "--epochs", "5", "--out", "lstm.json"],
        ["forecast", "predict", "--model-file", "lstm.json", "--series", "series.csv", "--out", "pred.csv"],
        ["forecast", "sweep", "--series", "series.csv", "--out", "sweep.csv"],
        ["forecast", "gradcheck", "--models", "3", "--out", "grad.csv"],
        ["simulate", "--topology", "topo.json", "--series", "series.csv", "--warmup-slots", "432", "--slots", "8",
         "--out-dir", "sim"],
        ["snapshot-report", "--topology", "topo.json", "--series", "series.csv", "--slots", "3,200",
         "--out-dir", "report"],
    ]
    for argv in steps:
        argv = [a if not a.endswith((".json", ".csv", ".tsv")) and a not in ("sim", "report") else str(root / a)
                for a in argv]
        assert main(argv) == 0, argv
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file() and not p.name.endswith(".manifest.json")}


def test_09_pipeline_bitwise_deterministic(tmp_path):
    first = _pipeline(tmp_path / "a")
    second = _pipeline(tmp_path / "b")
    assert len(first) == 17
    assert first == second


def test_10_kmeans_partition():
    bad = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = synth_workload(SynthConfig(regions=3, days=2), seed=seed)[0].values
        km = kmeans_1d(x, k=3, seed=seed)
        random_wcss = []
        for _ in range(1000):
            lab = rng.integers(0, 3, x.size)
            random_wcss.append(sum(((x[lab == j] - x[lab == j].mean()) ** 2).sum() for j in range(3) if (lab == j).any()))
        ok = (len(set(km.labels.tolist())) == 3 and np.all(np.diff(km.centroids) > 0)
              and km.inertia <= min(random_wcss))
        if not ok:
            bad.append(seed)
    assert bad == []
