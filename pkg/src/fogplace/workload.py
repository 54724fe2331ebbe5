"""Traffic ingestion, synthesis, grid-to-station mapping and demand snapshots."""
from __future__ import annotations

import csv
import gzip
import io
import json
import logging
import math
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import (ConfigurationError, DegenerateInputError, FormatError, InvalidInputError)
from .topology import BaseStation

log = logging.getLogger(__name__)

DEFAULT_INTERVAL_S = 600
# The Milan grid: 100 x 100 square cells of 235 m.
MILAN_GRID_SIDE = 100
MILAN_CELL_M = 235.0


@dataclass
class TrafficSeries:
    region_id: int
    start_time: float  # epoch seconds
    values: np.ndarray
    interval_s: int = DEFAULT_INTERVAL_S

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise InvalidInputError("series needs at least one value")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise InvalidInputError(f"region {self.region_id}: values must be finite and >= 0")
        if self.interval_s <= 0:
            raise InvalidInputError("interval_s must be > 0")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class ServiceSpec:
    service_class: str = "multimedia"  # multimedia | concurrent
    max_latency_ms: float = 100.0
    ram_gb: float = 2.0
    mips_demand: float = 1.0
    service_id: int = 0

    def __post_init__(self):
        if self.service_class not in ("multimedia", "concurrent"):
            raise InvalidInputError(f"unknown service class {self.service_class!r}")
        if not self.max_latency_ms > 0:
            raise InvalidInputError("max_latency_ms must be > 0")
        if self.service_class == "multimedia" and self.max_latency_ms > 100.0:
            raise InvalidInputError("multimedia services tolerate at most 100 ms")


MULTIMEDIA = ServiceSpec()
CONCURRENT = ServiceSpec("concurrent", max_latency_ms=200.0, ram_gb=1.0, service_id=1)


@dataclass
class DemandSnapshot:
    time: int
    demands: dict[int, float] = field(default_factory=dict)  # region -> volume
    service_id: int = 0

    def __post_init__(self):
        for r, v in self.demands.items():
            if not v > 0:
                raise InvalidInputError(f"slot {self.time}: demand of region {r} must be > 0")

    @property
    def total(self) -> float:
        return float(sum(self.demands.values()))

    def __len__(self):
        return len(self.demands)


# --- CDR parsing ---------------------------------------------------------------

@dataclass(frozen=True)
class ColumnMap:
    grid: str = "grid_id"
    timestamp: str = "timestamp"
    traffic: str = "traffic"
    delimiter: str = "\t"
    # Headerless files (like the raw Telecom Italia dumps) name columns by position.
    positions: tuple[int, int, int] | None = None


@dataclass
class ParseResult:
    records: list[tuple[int, float, float]]  # (grid_id, epoch seconds, traffic)
    skipped: int = 0
    merged: int = 0


def _parse_time(raw: str) -> float:
    raw = raw.strip()
    try:
        value = float(raw)
    except ValueError:
        pass
    else:
        return value / 1000.0  # epoch milliseconds
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError:
        raise FormatError(f"unparseable timestamp {raw!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _open_text(stream) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    head = stream.read(2)
    rest = stream.read()
    data = head + rest
    if head == b"\x1f\x8b":
        data = gzip.decompress(data)
    return io.StringIO(data.decode("utf-8"))


def parse_cdr(stream, column_map: ColumnMap = ColumnMap()) -> ParseResult:
    """Read delimiter-separated CDR traffic rows.

    Rows with an empty traffic field are skipped and counted. Several rows for
    the same grid and timestamp are summed. Output is sorted by (grid, time).
    Gzip-compressed byte streams are decompressed transparently.
    """
    text = _open_text(stream)
    reader = csv.reader(text, delimiter=column_map.delimiter)
    if column_map.positions is not None:
        gi, ti, vi = column_map.positions
    else:
        header = next(reader, None)
        if header is None:
            raise FormatError("empty CDR stream")
        header = [h.strip() for h in header]
        try:
            gi = header.index(column_map.grid)
            ti = header.index(column_map.timestamp)
            vi = header.index(column_map.traffic)
        except ValueError:
            raise FormatError(f"CDR header {header} lacks the mapped columns") from None
    acc: dict[tuple[int, float], float] = {}
    skipped = merged = 0
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= max(gi, ti, vi) or not row[vi].strip():
            skipped += 1
            continue
        try:
            grid = int(float(row[gi]))
            traffic = float(row[vi])
        except ValueError:
            raise FormatError(f"line {lineno}: bad grid id or traffic value") from None
        key = (grid, _parse_time(row[ti]))
        if key in acc:
            merged += 1
        acc[key] = acc.get(key, 0.0) + traffic
    if skipped:
        log.warning("skipped %d CDR rows with missing traffic", skipped)
    records = [(g, t, v) for (g, t), v in sorted(acc.items())]
    return ParseResult(records, skipped, merged)


# --- grid mapping ----------------------------------------------------------------

def grid_centers(side: int = MILAN_GRID_SIDE, cell_m: float = MILAN_CELL_M,
                 origin: tuple[float, float] = (0.0, 0.0)) -> dict[int, tuple[float, float]]:
    """Centres of a ``side`` x ``side`` square grid, ids row-major from 1."""
    out = {}
    for row in range(side):
        for col in range(side):
            out[row * side + col + 1] = (origin[0] + (col + 0.5) * cell_m,
                                         origin[1] + (row + 0.5) * cell_m)
    return out


def map_grids_to_stations(grid_geometry: Mapping[int, tuple[float, float]],
                          stations: Sequence[BaseStation]) -> dict[int, int]:
    """Assign each grid cell to the station covering its centre.

    Among covering stations the nearest wins; a cell nobody covers goes to the
    nearest station overall. Remaining ties go to the lowest station id.
    """
    if not stations:
        raise InvalidInputError("no stations to map grids onto")
    order = sorted(stations, key=lambda s: s.id)
    sid = np.array([s.id for s in order])
    sxy = np.array([(s.x, s.y) for s in order], dtype=float)
    srad = np.array([s.coverage_radius for s in order], dtype=float)
    gids = sorted(grid_geometry)
    gxy = np.array([grid_geometry[g] for g in gids], dtype=float).reshape(-1, 2)
    out: dict[int, int] = {}
    chunk = 2048
    for lo in range(0, len(gids), chunk):
        d = np.hypot(gxy[lo:lo + chunk, None, 0] - sxy[None, :, 0], gxy[lo:lo + chunk, None, 1] - sxy[None, :, 1])
        covered = d <= srad[None, :]
        masked = np.where(covered, d, np.inf)
        has_cover = covered.any(axis=1)
        # argmin returns the first minimum, i.e. the lowest station id on ties.
        pick = np.where(has_cover, masked.argmin(axis=1), d.argmin(axis=1))
        for k, j in enumerate(pick):
            out[gids[lo + k]] = int(sid[j])
    return out


def aggregate_to_regions(records: Iterable[tuple[int, float, float]], grid_map: Mapping[int, int],
                         interval_s: int = DEFAULT_INTERVAL_S, regions: Iterable[int] | None = None,
                         start_time: float | None = None) -> list[TrafficSeries]:
    """Sum grid traffic into per-region series on a common slot grid (gaps are zero)."""
    records = list(records)
    region_ids = sorted(set(grid_map.values()) if regions is None else set(regions))
    if not records:
        t0 = 0.0 if start_time is None else start_time
        return [TrafficSeries(r, t0, np.zeros(1), interval_s) for r in region_ids]
    t0 = min(t for _, t, _ in records) if start_time is None else start_time
    t0 = math.floor(t0 / interval_s) * interval_s
    n_slots = int(math.floor((max(t for _, t, _ in records) - t0) / interval_s)) + 1
    index = {r: k for k, r in enumerate(region_ids)}
    table = np.zeros((len(region_ids), n_slots))
    for grid, t, v in records:
        if grid not in grid_map:
            raise InvalidInputError(f"grid {grid} is not mapped to a station")
        slot = int((t - t0) // interval_s)
        if slot < 0:
            continue
        table[index[grid_map[grid]], slot] += v
    if n_slots > 1:
        empty = int((table.sum(axis=0) == 0).sum())
        if empty:
            log.warning("%d slots carry no traffic and were zero-filled", empty)
    return [TrafficSeries(r, float(t0), table[k], interval_s) for r, k in index.items()]


def series_matrix(series: Sequence[TrafficSeries]) -> tuple[list[int], np.ndarray]:
    """Stack aligned series into (region ids, regions x slots array)."""
    if not series:
        return [], np.zeros((0, 0))
    n = len(series[0])
    if any(len(s) != n or s.start_time != series[0].start_time for s in series):
        raise InvalidInputError("series are not aligned")
    return [s.region_id for s in series], np.vstack([s.values for s in series])


def demand_snapshots(series: Sequence[TrafficSeries], spec: ServiceSpec = MULTIMEDIA) -> list[DemandSnapshot]:
    """Per slot, regions whose traffic is strictly above that slot's cross-region mean."""
    ids, mat = series_matrix(series)
    if mat.size == 0:
        return []
    means = mat.mean(axis=0)
    out = []
    for t in range(mat.shape[1]):
        col = mat[:, t]
        chosen = {ids[k]: float(col[k]) for k in np.flatnonzero(col > means[t]) if col[k] > 0}
        out.append(DemandSnapshot(time=t, demands=chosen, service_id=spec.service_id))
    return out


# --- synthetic workload ----------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    regions: int = 20
    days: int = 7
    interval_s: int = DEFAULT_INTERVAL_S
    base_level: float = 100.0
    daily_amp: float = 60.0
    weekly_damp: float = 0.6
    noise_sd: float = 6.0
    urban_fraction: float = 0.5
    region_spread: float = 0.3  # lognormal sd of per-region scale; 0 makes regions identical
    peak_hour: float = 13.0
    start_weekday: int = 0  # 0 = Monday
    start_time: float = 1383264000.0  # 2013-11-01 00:00 UTC

    def validate(self) -> None:
        if self.regions < 1 or self.days < 1:
            raise ConfigurationError("regions and days must be >= 1")
        if self.interval_s <= 0 or 86400 % self.interval_s:
            raise ConfigurationError("interval_s must divide one day")
        if self.base_level < 0 or self.daily_amp < 0 or self.noise_sd < 0 or self.region_spread < 0:
            raise ConfigurationError("levels, amplitude and noise must be >= 0")
        if not 0 < self.weekly_damp <= 1:
            raise ConfigurationError("weekly_damp must lie in (0, 1]")
        if not 0 <= self.urban_fraction <= 1:
            raise ConfigurationError("urban_fraction must lie in [0, 1]")

    @property
    def slots_per_day(self) -> int:
        return 86400 // self.interval_s


def synth_workload(config: SynthConfig = SynthConfig(), seed: int = 0) -> list[TrafficSeries]:
    """Seeded diurnal traffic: sinusoid peaking mid-day, damped weekends for urban regions."""
    config.validate()
    rng = np.random.default_rng(seed)
    spd = config.slots_per_day
    n = config.days * spd
    hours = (np.arange(n) % spd) * (24.0 / spd)
    day = np.arange(n) // spd
    weekend = ((day + config.start_weekday) % 7) >= 5
    shape = np.cos(2 * np.pi * (hours - config.peak_hour) / 24.0)
    n_urban = int(round(config.urban_fraction * config.regions))
    scales = np.exp(rng.normal(0.0, config.region_spread, config.regions)) if config.region_spread else np.ones(config.regions)
    out = []
    for r in range(config.regions):
        signal = scales[r] * (config.base_level + config.daily_amp * shape)
        if r < n_urban:
            signal = np.where(weekend, signal * config.weekly_damp, signal)
        noise = rng.normal(0.0, config.noise_sd, n) if config.noise_sd else 0.0
        out.append(TrafficSeries(r, config.start_time, np.clip(signal + noise, 0.0, None), config.interval_s))
    return out


def read_synth_config(text: str) -> SynthConfig:
    """Parse the plain ``key = value`` synthetic-workload config (``#`` comments)."""
    kinds = {f.name: f.type for f in fields(SynthConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in kinds:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = int(raw) if kinds[key] in (int, "int") else float(raw)
        except ValueError:
            raise ConfigurationError(f"line {lineno}: bad value for {key}") from None
    cfg = SynthConfig(**values)
    cfg.validate()
    return cfg


# --- intensity classes ---------------------------------------------------------------------

INTENSITY_LABELS = ("low", "medium", "high")


@dataclass
class KMeans1D:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float


def kmeans_1d(values: np.ndarray, k: int = 3, seed: int = 0, max_iter: int = 300) -> KMeans1D:
    """Lloyd's algorithm on scalars with k-means++ seeding; clusters sorted by centroid."""
    x = np.asarray(values, dtype=float).ravel()
    if k < 2:
        raise InvalidInputError("k must be >= 2")
    if np.unique(x).size < k:
        raise DegenerateInputError(f"need at least {k} distinct values")
    rng = np.random.default_rng(seed)
    centroids = [x[rng.integers(x.size)]]
    for _ in range(1, k):
        d2 = np.min((x[:, None] - np.array(centroids)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total > 0:
            centroids.append(x[rng.choice(x.size, p=d2 / total)])
        else:  # squared gaps underflowed; draw uniformly among unused values
            fresh = np.flatnonzero(~np.isin(x, centroids))
            centroids.append(x[rng.choice(fresh)])
    c = np.sort(np.array(centroids))
    labels = np.zeros(x.size, dtype=int)
    for _ in range(max_iter):
        labels = np.abs(x[:, None] - c[None, :]).argmin(axis=1)
        new = c.copy()
        for j in range(k):
            members = x[labels == j]
            if members.size:
                new[j] = members.mean()
            else:  # re-seed an empty cluster on the worst-served point
                new[j] = x[np.argmax(np.min((x[:, None] - c[None, :]) ** 2, axis=1))]
        if np.array_equal(new, c):
            break
        c = new
    order = np.argsort(c, kind="stable")
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    c = c[order]
    labels = rank[np.abs(x[:, None] - c[None, :]).argmin(axis=1)]
    inertia = float(((x - c[labels]) ** 2).sum())
    return KMeans1D(c, labels, inertia)


def classify_intensity(series: Sequence[TrafficSeries], k: int = 3, seed: int = 0,
                       per_slot: bool = False) -> dict[tuple[int, int], str]:
    """Label every (region, slot) traffic value by 1-D k-means cluster.

    With ``per_slot`` the clustered value is each slot's total traffic, and
    every region of a slot carries the slot's label.
    """
    ids, mat = series_matrix(series)
    names = INTENSITY_LABELS if k == 3 else tuple(f"c{j}" for j in range(k))
    if per_slot:
        km = kmeans_1d(mat.sum(axis=0), k, seed)
        return {(r, t): names[km.labels[t]] for r in ids for t in range(mat.shape[1])}
    km = kmeans_1d(mat.ravel(), k, seed)
    lab = km.labels.reshape(mat.shape)
    return {(r, t): names[lab[i, t]] for i, r in enumerate(ids) for t in range(mat.shape[1])}


# --- output ---------------------------------------------------------------------------

def series_to_csv(series: Sequence[TrafficSeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region_id", "slot", "value"])
    for s in series:
        for t, v in enumerate(s.values):
            w.writerow([s.region_id, t, repr(float(v))])
    return buf.getvalue()


def series_from_csv(text: str, interval_s: int = DEFAULT_INTERVAL_S, start_time: float = 0.0) -> list[TrafficSeries]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"region_id", "slot", "value"} <= set(reader.fieldnames):
        raise FormatError("series CSV header must be region_id,slot,value")
    rows: dict[int, dict[int, float]] = {}
    for row in reader:
        rows.setdefault(int(row["region_id"]), {})[int(row["slot"])] = float(row["value"])
    n = max(max(d) for d in rows.values()) + 1
    out = []
    for r in sorted(rows):
        values = np.zeros(n)
        for t, v in rows[r].items():
            values[t] = v
        out.append(TrafficSeries(r, start_time, values, interval_s))
    return out


def snapshots_to_csv(snapshots: Sequence[DemandSnapshot]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region_id", "slot", "value"])
    for snap in snapshots:
        for r in sorted(snap.demands):
            w.writerow([r, snap.time, repr(snap.demands[r])])
    return buf.getvalue()


def snapshots_to_json(snapshots: Sequence[DemandSnapshot]) -> str:
    doc = [{"slot": s.time, "service_id": s.service_id,
            "demands": {str(r): s.demands[r] for r in sorted(s.demands)}} for s in snapshots]
    return json.dumps(doc, indent=1) + "\n"
