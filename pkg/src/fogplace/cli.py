"""Command-line front end: ``fogplace <command> ...``.

Every command that writes a file also writes ``<file>.manifest.json`` with the
resolved configuration, its hash, the seed, input and output digests and the
package and schema versions. Any flag may come from ``--config FILE`` (plain
``key = value`` lines); flags on the command line win.

Exit codes: 0 success, 2 usage or input error, 3 infeasible or degenerate
data, 4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigurationError, ConvergenceError, DegenerateInputError, FogPlaceError, FormatError,
                     InvalidInputError, InvariantViolation, SolverSizeError, TrainingError, UnknownEntityError)

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_INVARIANT = 0, 2, 3, 4
MANIFEST_SCHEMA = "fogplace.manifest/1"

log = logging.getLogger("fogplace.cli")


def schema_versions() -> dict[str, str]:
    from .forecast.arima import ARIMA_SCHEMA
    from .forecast.lstm import LSTM_SCHEMA
    from .placement.model import INSTANCE_SCHEMA, SOLUTION_SCHEMA
    from .reservation import PLAN_SCHEMA
    from .simulate import REPORT_SCHEMA
    from .topology import TOPOLOGY_SCHEMA
    return {"arima": ARIMA_SCHEMA, "instance": INSTANCE_SCHEMA, "lstm": LSTM_SCHEMA, "manifest": MANIFEST_SCHEMA,
            "reservation": PLAN_SCHEMA, "simreport": REPORT_SCHEMA, "solution": SOLUTION_SCHEMA,
            "topology": TOPOLOGY_SCHEMA}


# --- config files and manifests ---------------------------------------------------------

def read_config(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _digest_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _resolved(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if not k.startswith("_") and k not in ("func", "config")}


def config_hash(args: argparse.Namespace) -> str:
    return hashlib.sha256(json.dumps(_resolved(args), sort_keys=True, default=str).encode()).hexdigest()


def write_manifest(args: argparse.Namespace, inputs: list, outputs: list, started: float) -> None:
    doc = {
        "schema": MANIFEST_SCHEMA,
        "command": args._command,
        "config": _resolved(args),
        "config_hash": config_hash(args),
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _digest_file(Path(p)) for p in inputs if p},
        "outputs": {str(p): _digest_file(Path(p)) for p in outputs},
        "versions": {"fogplace": __version__, "numpy": np.__version__, **schema_versions()},
        "timestamps": {"started": started, "finished": time.time()},
    }
    for out in outputs:
        Path(f"{out}.manifest.json").write_text(json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n")


def _write(path: str | Path, text: str) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True)
    p.write_text(text)
    return p


def _read(path: str | None, what: str) -> str:
    if not path:
        raise InvalidInputError(f"--{what} is required")
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None


def _need(args, *names):
    for n in names:
        if getattr(args, n) in (None, ""):
            raise InvalidInputError(f"--{n.replace('_', '-')} is required")


def _ints(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


# --- topology --------------------------------------------------------------------------

def cmd_topology_build(args) -> int:
    from .topology import (assign_resources, build_hierarchy, check_topology, dumps_topology, random_stations,
                           read_stations_csv)
    _need(args, "out")
    if args.stations:
        stations = read_stations_csv(_read(args.stations, "stations"), latlon=args.latlon)
    elif args.synthetic:
        stations = random_stations(args.synthetic, seed=args.seed)
    else:
        raise InvalidInputError("give --stations FILE or --synthetic N")
    topo = build_hierarchy(stations, radius_m=args.radius_m, mu=args.mu, seed=args.seed)
    assign_resources(topo, seed=args.seed)
    problems = check_topology(topo)
    if problems:
        raise InvariantViolation("; ".join(problems[:5]))
    out = _write(args.out, dumps_topology(topo))
    write_manifest(args, [args.stations], [out], args._started)
    print(f"tiers {topo.tier_sizes()} -> {out}")
    return EXIT_OK


# --- workload ----------------------------------------------------------------------------

def _emit_series(args, series, inputs, started) -> int:
    from .workload import demand_snapshots, series_to_csv, snapshots_to_csv
    outs = [_write(args.out, series_to_csv(series))]
    if args.snapshots_out:
        outs.append(_write(args.snapshots_out, snapshots_to_csv(demand_snapshots(series))))
    write_manifest(args, inputs, outs, started)
    print(f"{len(series)} regions x {len(series[0])} slots -> {outs[0]}")
    return EXIT_OK


def cmd_workload_ingest(args) -> int:
    from .topology import read_stations_csv
    from .workload import ColumnMap, aggregate_to_regions, grid_centers, map_grids_to_stations, parse_cdr
    _need(args, "cdr", "stations", "out")
    stations = read_stations_csv(_read(args.stations, "stations"), latlon=args.latlon)
    positions = tuple(_ints(args.positions)) if args.positions else None
    if positions is not None and len(positions) != 3:
        raise InvalidInputError("--positions takes grid,timestamp,traffic column indices")
    cmap = ColumnMap(delimiter=args.delimiter.encode().decode("unicode_escape"), positions=positions)
    try:
        with open(args.cdr, "rb") as fh:
            parsed = parse_cdr(fh, cmap)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {args.cdr}: {exc.strerror}") from None
    if not parsed.records:
        raise DegenerateInputError("CDR file holds no usable traffic rows")
    grid_map = map_grids_to_stations(grid_centers(args.grid_side, args.cell_m), stations)
    series = aggregate_to_regions(parsed.records, grid_map, interval_s=args.interval_s,
                                  regions=[s.id for s in stations])
    if args.check_conservation:
        total_in = sum(v for _, _, v in parsed.records)
        total_out = float(sum(s.values.sum() for s in series))
        if abs(total_in - total_out) > 1e-9 * max(1.0, abs(total_in)):
            raise InvariantViolation(f"traffic not conserved: {total_in!r} in, {total_out!r} out")
        print(f"conservation ok: {total_out!r}")
    return _emit_series(args, series, [args.cdr, args.stations], args._started)


def cmd_workload_synth(args) -> int:
    from .workload import SynthConfig, synth_workload
    _need(args, "out")
    cfg = SynthConfig(regions=args.regions, days=args.days, interval_s=args.interval_s, noise_sd=args.noise_sd,
                      base_level=args.base_level, daily_amp=args.daily_amp, region_spread=args.region_spread)
    series = synth_workload(cfg, seed=args.seed)
    return _emit_series(args, series, [], args._started)


# --- forecast --------------------------------------------------------------------------

def _load_region(args):
    from .workload import series_from_csv
    series = series_from_csv(_read(args.series, "series"))
    if not series:
        raise DegenerateInputError("series file is empty")
    by_id = {s.region_id: s for s in series}
    region = series[0].region_id if args.region is None else args.region
    if region not in by_id:
        raise UnknownEntityError(f"region {region} not in {args.series}")
    return region, by_id[region].values


def _split(values, fraction) -> int:
    if not 0 < fraction < 1:
        raise InvalidInputError("--train-fraction must lie in (0, 1)")
    return int(round(values.size * fraction))


def _hyper(args):
    from .forecast.lstm import LstmHyperparams
    return LstmHyperparams(window=args.window, hidden_dim=args.hidden, layers=args.layers, epochs=args.epochs,
                           learning_rate=args.learning_rate, loss=args.loss, batch_size=args.batch_size)


def cmd_forecast_fit(args) -> int:
    from .forecast import evaluate, naive_last_value
    from .forecast.arima import arima_to_json, auto_arima, fit_arima, one_step_forecasts
    from .forecast.lstm import lstm_evaluate, lstm_to_json, lstm_train
    _need(args, "series", "out")
    region, y = _load_region(args)
    cut = _split(y, args.train_fraction)
    if args.model == "arima":
        if args.auto:
            res = auto_arima(y[:cut], seed=args.seed)
            model = res.model
        else:
            order = _ints(args.order)
            if len(order) != 3:
                raise InvalidInputError("--order takes p,d,q")
            model = fit_arima(y[:cut], *order, seed=args.seed)
        metrics = evaluate(one_step_forecasts(model, y, cut), y[cut:])
        text = arima_to_json(model)
        label = f"ARIMA{model.order}"
    else:
        result = lstm_train(y[:cut], _hyper(args), seed=args.seed)
        model = result.model
        metrics = lstm_evaluate(model, y, cut)
        text = lstm_to_json(model)
        label = f"LSTM(window={model.window}, hidden={model.hidden_dim}, layers={model.layers})"
    naive = evaluate(naive_last_value(y, cut), y[cut:])
    out = _write(args.out, text)
    write_manifest(args, [args.series], [out], args._started)
    print(f"region {region} {label}: holdout MAE {metrics.mae:.6g} RMSE {metrics.rmse:.6g} "
          f"(naive MAE {naive.mae:.6g}) -> {out}")
    return EXIT_OK


def _load_model(path):
    from .forecast.arima import ARIMA_SCHEMA, arima_from_json
    from .forecast.lstm import LSTM_SCHEMA, lstm_from_json
    text = _read(path, "model-file")
    try:
        schema = json.loads(text).get("schema")
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if schema == ARIMA_SCHEMA:
        return "arima", arima_from_json(text)
    if schema == LSTM_SCHEMA:
        return "lstm", lstm_from_json(text)
    raise FormatError(f"{path}: unknown model schema {schema!r}")


def cmd_forecast_predict(args) -> int:
    from .forecast.arima import one_step_forecasts
    from .forecast.lstm import lstm_one_step
    _need(args, "model_file", "series", "out")
    kind, model = _load_model(args.model_file)
    region, y = _load_region(args)
    start = args.start if args.start is not None else _split(y, args.train_fraction)
    pred = one_step_forecasts(model, y, start) if kind == "arima" else lstm_one_step(model, y, start)
    lines = ["slot,prediction,actual"] + [f"{start + i},{p!r},{a!r}" for i, (p, a) in
                                          enumerate(zip(pred.tolist(), y[start:].tolist()))]
    out = _write(args.out, "\n".join(lines) + "\n")
    write_manifest(args, [args.model_file, args.series], [out], args._started)
    print(f"region {region}: {pred.size} one-step forecasts -> {out}")
    return EXIT_OK


def cmd_forecast_sweep(args) -> int:
    from .forecast import evaluate
    from .forecast.arima import candidate_orders, fit_arima, one_step_forecasts
    from .forecast.lstm import LstmHyperparams, lstm_evaluate, lstm_train
    _need(args, "series", "out")
    region, y = _load_region(args)
    cut = _split(y, args.train_fraction)
    rows = []
    if args.model == "arima":
        header = "p,d,q,mae,rmse"
        for p, d, q in candidate_orders(max_order=2):
            try:
                m = fit_arima(y[:cut], p, d, q, seed=args.seed)
                met = evaluate(one_step_forecasts(m, y, cut), y[cut:])
            except (InvalidInputError, ConvergenceError) as exc:
                log.warning("ARIMA(%d,%d,%d) failed: %s", p, d, q, exc)
                continue
            rows.append(((met.mae, met.rmse), f"{p},{d},{q},{met.mae!r},{met.rmse!r}"))
    else:
        header = "epochs,learning_rate,layers,hidden,mae,rmse"
        for epochs in _ints(args.epochs_grid):
            for lr in _floats(args.lr_grid):
                for layers in _ints(args.layers_grid):
                    for hidden in _ints(args.hidden_grid):
                        hyper = LstmHyperparams(window=args.window, hidden_dim=hidden, layers=layers, epochs=epochs,
                                                learning_rate=lr, loss=args.loss, batch_size=args.batch_size)
                        try:
                            met = lstm_evaluate(lstm_train(y[:cut], hyper, seed=args.seed).model, y, cut)
                        except TrainingError as exc:
                            log.warning("LSTM %s diverged: %s", hyper, exc)
                            continue
                        rows.append(((met.mae, met.rmse),
                                     f"{epochs},{lr!r},{layers},{hidden},{met.mae!r},{met.rmse!r}"))
    if not rows:
        raise DegenerateInputError("every sweep candidate failed")
    rows.sort(key=lambda r: r[0])
    out = _write(args.out, header + "\n" + "".join(r[1] + "\n" for r in rows))
    write_manifest(args, [args.series], [out], args._started)
    print(f"region {region}: best {header.rsplit(',', 2)[0]} = {rows[0][1]} -> {out}")
    return EXIT_OK


def cmd_forecast_gradcheck(args) -> int:
    from .forecast.lstm import init_lstm, lstm_gradient_check
    worst = 0.0
    lines = ["seed,max_rel_error"]
    for s in range(args.seed, args.seed + args.models):
        rng = np.random.default_rng(s)
        model = init_lstm(args.window, args.hidden, layers=args.layers, seed=s, scale=0.5)
        err = lstm_gradient_check(model, rng.random(args.window), float(rng.random()), loss=args.loss,
                                  corrupt_gate=args.corrupt_gate)
        worst = max(worst, err)
        lines.append(f"{s},{err!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        out = _write(args.out, text)
        write_manifest(args, [], [out], args._started)
    print(f"max relative error over {args.models} models: {worst:.3e} (tolerance {args.tolerance:g})")
    if args.corrupt_gate is None and worst > args.tolerance:
        raise InvariantViolation(f"gradient check failed: {worst:.3e} > {args.tolerance:g}")
    return EXIT_OK


# --- simulation ------------------------------------------------------------------------

def _scenario(args, seed):
    from .simulate import build_scenario, scenario_from_series
    from .topology import loads_topology
    from .workload import series_from_csv
    if args.topology or args.series:
        _need(args, "topology", "series")
        topo = loads_topology(_read(args.topology, "topology"))
        series = series_from_csv(_read(args.series, "series"))
        return scenario_from_series(topo, series, args.warmup_slots, seed)
    return build_scenario(regions=args.regions, days=args.days, warmup_days=args.warmup_days, seed=seed)


def _one_run(payload):
    args, seed, strategies = payload
    from .simulate import SimConfig, run
    sc = _scenario(args, seed)
    reports, events = [], []
    for strategy in strategies:
        cfg = SimConfig(strategy=strategy, slots=args.slots, seed=seed, latency_cap_ms=args.latency_cap_ms,
                        link_reliability=tuple(_floats(args.link_reliability)),
                        concurrent_load_fraction=args.concurrent_load, capacity_scale=args.capacity_scale,
                        max_facilities=args.max_facilities, max_demands=args.max_demands)
        reports.append(run(sc.topology, sc.snapshots, sc.forecasts, cfg, events))
    return reports, events


def cmd_simulate(args) -> int:
    from .simulate import STRATEGIES, events_to_jsonl, reports_to_json, traces_to_csv
    _need(args, "out_dir")
    if args.slots is not None and args.slots < 1:
        raise InvalidInputError("--slots must be >= 1")
    strategies = list(STRATEGIES) if args.strategy == "all" else [args.strategy]
    seeds = _ints(args.seeds) if args.seeds else [args.seed]
    plain = argparse.Namespace(**{k: v for k, v in vars(args).items() if k not in ("_parser", "func")})
    payloads = [(plain, s, strategies) for s in seeds]
    if args.parallel_runs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel_runs) as pool:
            results = list(pool.map(_one_run, payloads))
    else:
        results = [_one_run(p) for p in payloads]
    reports = [r for rs, _ in results for r in rs]
    events = [e for _, ev in results for e in ev]
    out_dir = Path(args.out_dir)
    rows = ["seed,strategy,content_delivery_rate,packet_delivery_rate,avg_latency_ms,network_usage,"
            "link_usage,migration_usage"]
    for r in reports:
        rows.append(f"{r.seed},{r.strategy},{r.content_delivery_rate!r},{r.packet_delivery_rate!r},"
                    f"{r.avg_latency_ms!r},{r.network_usage!r},{r.link_usage!r},{r.migration_usage!r}")
    outs = [_write(out_dir / "comparison.csv", "\n".join(rows) + "\n"),
            _write(out_dir / "traces.csv", traces_to_csv(reports)),
            _write(out_dir / "summary.json", reports_to_json(reports)),
            _write(out_dir / "events.jsonl", events_to_jsonl(events))]
    write_manifest(args, [args.topology, args.series], outs, args._started)
    for r in reports:
        print(f"seed {r.seed} {r.strategy:>8}: content {r.content_delivery_rate:.4f} packets "
              f"{r.packet_delivery_rate:.4f} latency {r.avg_latency_ms:.2f} ms usage {r.network_usage:.1f}")
    return EXIT_OK


def cmd_snapshot_report(args) -> int:
    from .simulate import snapshot_report, snapshot_report_csv, snapshot_report_json
    from .topology import loads_topology
    from .workload import series_from_csv
    _need(args, "topology", "series", "slots", "out_dir")
    topo = loads_topology(_read(args.topology, "topology"))
    series = series_from_csv(_read(args.series, "series"))
    analyses = snapshot_report(topo, series, _ints(args.slots), capacity_scale=args.capacity_scale,
                               latency_cap_ms=args.latency_cap_ms, seed=args.seed,
                               concurrent_load_fraction=args.concurrent_load)
    out_dir = Path(args.out_dir)
    outs = [_write(out_dir / "snapshots.csv", snapshot_report_csv(analyses)),
            _write(out_dir / "snapshots.json", snapshot_report_json(analyses))]
    write_manifest(args, [args.topology, args.series], outs, args._started)
    for a in analyses:
        print(f"slot {a.slot} ({a.intensity}): selected {a.selected}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------

def _add_series_args(p):
    p.add_argument("--series", help="series CSV (region_id,slot,value)")
    p.add_argument("--region", type=int, help="region id (default: lowest)")
    p.add_argument("--train-fraction", type=float, default=40 / 62)


def _add_lstm_args(p):
    p.add_argument("--window", type=int, default=24)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--loss", choices=("mae", "mse"), default="mae")
    p.add_argument("--batch-size", type=int, default=512)


def _add_sim_args(p):
    p.add_argument("--capacity-scale", type=float, default=0.015, help="capacity units per GB of storage")
    p.add_argument("--latency-cap-ms", type=float, default=100.0)
    p.add_argument("--concurrent-load", type=float, default=0.3, help="concurrent load as a fraction of capacity")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogplace", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="store_true", help="print package and schema versions")
    parser.add_argument("--config", help="key = value file supplying default flag values")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command")

    def leaf(subparsers, name, func, **kw):
        p = subparsers.add_parser(name, **kw)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func, _parser=p)
        return p

    topo = sub.add_parser("topology", help="build the node hierarchy").add_subparsers(dest="action", required=True)
    p = leaf(topo, "build", cmd_topology_build)
    p.add_argument("--stations", help="station CSV (id,x_m,y_m,coverage_radius_m)")
    p.add_argument("--latlon", action="store_true", help="station CSV holds id,lat,lon,coverage_radius_m")
    p.add_argument("--synthetic", type=int, help="use N random stations instead of a file")
    p.add_argument("--radius-m", type=float, default=3000.0)
    p.add_argument("--mu", type=int, default=2)
    p.add_argument("--out")

    wl = sub.add_parser("workload", help="traffic series").add_subparsers(dest="action", required=True)
    p = leaf(wl, "ingest", cmd_workload_ingest)
    p.add_argument("--cdr", help="CDR file (grid_id, timestamp, traffic; gzip allowed)")
    p.add_argument("--stations")
    p.add_argument("--latlon", action="store_true")
    p.add_argument("--delimiter", default="\\t")
    p.add_argument("--positions", help="headerless file: grid,timestamp,traffic column indices")
    p.add_argument("--grid-side", type=int, default=100)
    p.add_argument("--cell-m", type=float, default=235.0)
    p.add_argument("--interval-s", type=int, default=600)
    p.add_argument("--check-conservation", action="store_true")
    p.add_argument("--out")
    p.add_argument("--snapshots-out")
    p = leaf(wl, "synth", cmd_workload_synth)
    p.add_argument("--regions", type=int, default=20)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--interval-s", type=int, default=600)
    p.add_argument("--noise-sd", type=float, default=6.0)
    p.add_argument("--base-level", type=float, default=100.0)
    p.add_argument("--daily-amp", type=float, default=60.0)
    p.add_argument("--region-spread", type=float, default=0.3)
    p.add_argument("--out")
    p.add_argument("--snapshots-out")

    fc = sub.add_parser("forecast", help="traffic forecasting").add_subparsers(dest="action", required=True)
    p = leaf(fc, "fit", cmd_forecast_fit)
    p.add_argument("--model", choices=("arima", "lstm"), default="arima")
    p.add_argument("--order", default="1,1,1")
    p.add_argument("--auto", action="store_true", help="pick the ARIMA order by holdout MAE")
    _add_series_args(p)
    _add_lstm_args(p)
    p.add_argument("--out")
    p = leaf(fc, "predict", cmd_forecast_predict)
    p.add_argument("--model-file")
    _add_series_args(p)
    p.add_argument("--start", type=int, help="first predicted slot (default: end of training part)")
    p.add_argument("--out")
    p = leaf(fc, "sweep", cmd_forecast_sweep)
    p.add_argument("--model", choices=("arima", "lstm"), default="arima")
    _add_series_args(p)
    _add_lstm_args(p)
    p.add_argument("--epochs-grid", default="100,300")
    p.add_argument("--lr-grid", default="0.001,0.01,0.1")
    p.add_argument("--layers-grid", default="1,2")
    p.add_argument("--hidden-grid", default="8,16")
    p.add_argument("--out")
    p = leaf(fc, "gradcheck", cmd_forecast_gradcheck)
    p.add_argument("--models", type=int, default=20)
    p.add_argument("--window", type=int, default=6)
    p.add_argument("--hidden", type=int, default=4)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--loss", choices=("mae", "mse"), default="mse")
    p.add_argument("--corrupt-gate", choices=("forget", "input", "candidate", "output"))
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--out")

    p = leaf(sub, "simulate", cmd_simulate, help="compare placement strategies")
    p.add_argument("--strategy", choices=("DA", "QoEAP", "SMART_FL", "TIPTOP", "all"), default="all")
    p.add_argument("--slots", type=int)
    p.add_argument("--seeds", help="comma-separated seeds (overrides --seed)")
    p.add_argument("--parallel-runs", type=int, default=1)
    p.add_argument("--topology")
    p.add_argument("--series", help="series CSV covering warm-up and simulated slots")
    p.add_argument("--warmup-slots", type=int, default=432)
    p.add_argument("--regions", type=int, default=20)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--warmup-days", type=int, default=3)
    p.add_argument("--link-reliability", default="0.998,0.9995,0.9999")
    p.add_argument("--max-facilities", type=int, default=12)
    p.add_argument("--max-demands", type=int, default=15)
    _add_sim_args(p)
    p.add_argument("--out-dir")

    p = leaf(sub, "snapshot-report", cmd_snapshot_report, help="per-slot node selection report")
    p.add_argument("--topology")
    p.add_argument("--series")
    p.add_argument("--slots", help="comma-separated slot indices")
    _add_sim_args(p)
    p.set_defaults(concurrent_load=0.0)
    p.add_argument("--out-dir")
    return parser


def _apply_config(leaf: argparse.ArgumentParser, cfg: dict[str, str]) -> None:
    actions = {a.dest: a for a in leaf._actions}
    for key, value in cfg.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise ConfigurationError(f"config key {key!r} is not a flag of this command")
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigurationError(f"config key {key!r} needs true or false")
            leaf.set_defaults(**{key: value.lower() in ("true", "1", "yes")})
        else:
            leaf.set_defaults(**{key: value})


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.version:
        print(json.dumps({"fogplace": __version__, "schemas": schema_versions()}, sort_keys=True, indent=2))
        return EXIT_OK
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr, format="%(levelname)s %(name)s %(message)s")
    try:
        if args.config:
            _apply_config(args._parser, read_config(args.config))
            args = parser.parse_args(argv)
        args._command = " ".join(a for a in (args.command, getattr(args, "action", None)) if a)
        args._started = time.time()
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except InvariantViolation as exc:
        print(f"fogplace: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DegenerateInputError, ConvergenceError, TrainingError) as exc:
        print(f"fogplace: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InvalidInputError, ConfigurationError, FormatError, UnknownEntityError, SolverSizeError) as exc:
        print(f"fogplace: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FogPlaceError as exc:
        print(f"fogplace: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
